"""Offline checks: simple regret, the all-estimates-within-width event, packing-based dimension estimates."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import greedy_pack, xi_replay
from .objectives import Objective
from .optimizers import Recommendation, RunTrace, StoSooParams
from .partition import SemiMetric

__all__ = [
    "SemiMetric",
    "PackingReport",
    "regret",
    "raw_regret",
    "xi_event_holds",
    "xi_first_violation",
    "packing_number",
    "packing_report",
    "dimension_fit",
]

log = logging.getLogger(__name__)


def raw_regret(obj: Objective, rec: Recommendation) -> float:
    if obj.known_max is None:
        raise ValueError(f"objective {obj.name!r} has no known maximum; attach one with grid_optimum")
    return obj.known_max[1] - obj.true_f(rec.point)


def regret(obj: Objective, rec: Recommendation) -> float:
    """``sup f - f(x(n))`` against the grid oracle, floored at 0."""
    r = raw_regret(obj, rec)
    if r < 0.0:
        log.debug("negative raw regret %.3g on %s (grid resolution); clamped to 0", r, obj.name)
        return 0.0
    return r


def _middle_children(trace: RunTrace) -> np.ndarray:
    m = trace.depth.shape[0]
    mid = np.full(m, -1, dtype=np.int64)
    if trace.K % 2 == 1:
        kids = np.flatnonzero((trace.parent >= 0) & (trace.slot == trace.K // 2))
        mid[trace.parent[kids]] = kids
    return mid


def _validate(trace: RunTrace) -> None:
    m = trace.depth.shape[0]
    if trace.eval_node.shape != trace.eval_reward.shape or trace.exp_node.shape != trace.exp_time.shape:
        raise ValueError("malformed trace: mismatched event arrays")
    for arr, what in ((trace.eval_node, "evaluation"), (trace.exp_node, "expansion")):
        if arr.size and (arr.min() < 0 or arr.max() >= m):
            raise ValueError(f"malformed trace: {what} refers to an unknown node")
    if trace.exp_time.size and np.any(np.diff(trace.exp_time) < 0):
        raise ValueError("malformed trace: expansion times are not ordered")


def xi_first_violation(trace: RunTrace, obj: Objective, params: StoSooParams) -> int:
    """Index of the first evaluation after which some estimate leaves its width; -1 if none."""
    _validate(trace)
    touched = np.unique(trace.eval_node)
    fvals = np.full(trace.depth.shape[0], np.nan)
    for j in touched:
        fvals[j] = obj.true_f(trace.rep[j])
    # inherited estimates share the parent's point, hence its true value
    mid = _middle_children(trace)
    for p in trace.exp_node:
        if mid[p] >= 0:
            fvals[mid[p]] = fvals[p]
    return int(
        xi_replay(
            trace.depth.shape[0],
            mid,
            np.ascontiguousarray(trace.eval_node),
            np.ascontiguousarray(trace.eval_reward),
            np.ascontiguousarray(trace.exp_node),
            np.ascontiguousarray(trace.exp_time),
            fvals,
            params.log_term,
            trace.reuse_middle,
        )
    )


def xi_event_holds(trace: RunTrace, obj: Objective, params: StoSooParams) -> bool:
    """Replay ``trace``: did every running mean stay within ``sqrt(log(nk/delta)/(2T))`` of f?"""
    return xi_first_violation(trace, obj, params) < 0


@dataclass
class PackingReport:
    epsilons: list[float]
    counts: list[int]
    fitted_exponent: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epsilon,count\n")
        for e, c in zip(self.epsilons, self.counts):
            buf.write(f"{e!r},{c}\n")
        buf.write(f"# fitted_exponent={self.fitted_exponent!r}\n")
        return buf.getvalue()


def _near_optimal_grid(obj: Objective, epsilon: float, grid: int) -> np.ndarray:
    if obj.dim != 1:
        raise ValueError("the packing estimator supports 1-D domains only")
    if grid < 10**5:
        raise ValueError(f"packing grid must have >= 1e5 points, got {grid}")
    if obj.known_max is None:
        raise ValueError(f"objective {obj.name!r} has no known maximum")
    xs = np.linspace(obj.domain.lower[0], obj.domain.upper[0], grid)
    fs = obj.batch(xs[:, None])
    return xs[fs >= obj.known_max[1] - epsilon]


def packing_number(obj: Objective, metric: SemiMetric, epsilon: float, nu: float, grid: int = 10**7) -> int:
    """Greedy count of disjoint l-balls of radius nu*eps centred in the eps-optimal set.

    Grid points of the eps-optimal set are scanned left to right and kept
    when farther than ``2 nu eps`` (in l) from the previously kept one.  The
    result is a maximal packing, at least half the size of a maximum one.
    """
    if not epsilon > 0.0:
        raise ValueError("epsilon must be > 0")
    if not nu > 0.0:
        raise ValueError("nu must be > 0")
    xs = _near_optimal_grid(obj, epsilon, grid)
    return int(greedy_pack(xs, float(metric.L), float(metric.alpha), 2.0 * nu * epsilon))


def dimension_fit(epsilons, counts) -> float:
    """Least-squares slope of log(count) against log(1/eps)."""
    eps = np.asarray(epsilons, dtype=np.float64)
    cnt = np.asarray(counts, dtype=np.float64)
    if eps.size < 3:
        raise ValueError("need at least 3 epsilon values")
    if np.log10(eps.max() / eps.min()) < 2.0 - 1e-9:
        raise ValueError("epsilon values must span at least two decades")
    if not np.any(cnt > 0):
        raise ValueError("all packing counts are zero")
    keep = cnt > 0
    if keep.sum() < 2:
        raise ValueError("need at least two nonzero packing counts")
    slope, _ = np.polyfit(np.log(1.0 / eps[keep]), np.log(cnt[keep]), 1)
    return float(slope)


def packing_report(obj: Objective, metric: SemiMetric, epsilons, nu: float, grid: int = 10**7) -> PackingReport:
    eps = [float(e) for e in epsilons]
    counts = [packing_number(obj, metric, e, nu, grid) for e in eps]
    return PackingReport(eps, counts, dimension_fit(eps, counts))


def xi_fraction(holds) -> float:
    holds = list(holds)
    return sum(bool(h) for h in holds) / len(holds) if holds else math.nan
