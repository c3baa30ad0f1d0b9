"""Optimistic hierarchical optimization of noisy black-box functions.

StoSOO needs no smoothness parameters: it grows a K-ary partition tree of
the domain, samples each promising leaf ``k`` times before splitting it,
and recommends the best-looking point at the deepest expanded depth.
Deterministic SOO and a stochastic DOO baseline share its kernel.
"""

from ._accel import backend_name
from .analysis import packing_number, packing_report, regret, xi_event_holds
from .harness import RunConfig, RunResult, emit_csv, read_csv, run_experiment
from .objectives import (
    NoiseChannel,
    Objective,
    envelope_mismatch,
    evaluate_noisy,
    garland,
    get_objective,
    grid_optimum,
    two_sine_product,
)
from .optimizers import (
    DooParams,
    Recommendation,
    SooParams,
    StoSooParams,
    default_params,
    soo_run,
    stodoo_run,
    stosoo_run,
)
from .partition import Box, Cell, SemiMetric, split
from .tree import PartitionTree

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Cell",
    "DooParams",
    "NoiseChannel",
    "Objective",
    "PartitionTree",
    "Recommendation",
    "RunConfig",
    "RunResult",
    "SemiMetric",
    "SooParams",
    "StoSooParams",
    "backend_name",
    "default_params",
    "emit_csv",
    "envelope_mismatch",
    "evaluate_noisy",
    "garland",
    "get_objective",
    "grid_optimum",
    "packing_number",
    "packing_report",
    "read_csv",
    "regret",
    "run_experiment",
    "soo_run",
    "split",
    "stodoo_run",
    "stosoo_run",
    "two_sine_product",
    "xi_event_holds",
]
