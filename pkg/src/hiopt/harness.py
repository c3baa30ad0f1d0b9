"""Seeded regret experiments: configuration, execution, CSV and SVG output."""

from __future__ import annotations

import concurrent.futures
import logging
import math
import os
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import regret
from .objectives import OBJECTIVE_NAMES, get_objective
from .optimizers import OPTIMIZERS, params_for, run
from .partition import SemiMetric

log = logging.getLogger(__name__)

CSV_HEADER = "optimizer,objective,sigma,n,rep,seed,regret,rec_x,rec_mu,depth,ms"
THREADS_ENV = "HIOPT_THREADS"
_MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def run_seed(base_seed: int, n: int, rep: int) -> int:
    """64-bit per-run seed; independent of the order runs are executed in."""
    z = _splitmix64(base_seed & _MASK64)
    z = _splitmix64(z ^ (n & _MASK64))
    return _splitmix64(z ^ (rep & _MASK64))


@dataclass(frozen=True)
class RunConfig:
    objective: str = "two-sine"
    sigma: float = 0.0
    optimizer: str = "stosoo"
    budgets: tuple[int, ...] = (1000,)
    repetitions: int = 10
    base_seed: int = 0
    k: Optional[int] = None
    h_max: Optional[int] = None
    delta: Optional[float] = None
    K: Optional[int] = None
    reuse: bool = True
    L: Optional[float] = None
    alpha: Optional[float] = None
    truncation: float = 1.0
    grid_file: Optional[str] = None
    timing: bool = True
    out: Optional[str] = None
    dump_tree: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.objective not in OBJECTIVE_NAMES:
            raise ConfigError(f"unknown objective {self.objective!r}; choose from {', '.join(OBJECTIVE_NAMES)}")
        if self.objective == "custom-grid" and not self.grid_file:
            raise ConfigError("objective custom-grid needs grid_file")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}; choose from {', '.join(OPTIMIZERS)}")
        if not self.budgets:
            raise ConfigError("budgets must be nonempty")
        if any(b < 1 for b in self.budgets):
            raise ConfigError("budgets must be >= 1")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("budgets must be strictly ascending")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.sigma < 0 or not math.isfinite(self.sigma):
            raise ConfigError("sigma must be finite and >= 0")
        if self.optimizer == "soo" and self.sigma != 0.0:
            raise ConfigError("soo is deterministic; use sigma=0")
        if (self.L is None) != (self.alpha is None) and self.optimizer == "stodoo":
            raise ConfigError("stodoo metric needs both L and alpha")
        for n in self.budgets:
            try:
                self.params(n)
            except ValueError as exc:
                raise ConfigError(f"invalid parameters at n={n}: {exc}") from None
        return self

    @property
    def metric(self) -> Optional[SemiMetric]:
        if self.optimizer != "stodoo":
            return None
        return SemiMetric(144.0 if self.L is None else self.L, 2.0 if self.alpha is None else self.alpha)

    def params(self, n: int):
        return params_for(
            self.optimizer,
            n,
            metric=self.metric,
            k=self.k,
            h_max=self.h_max,
            delta=self.delta,
            K=self.K,
            reuse_middle=None if self.reuse else False,
        )

    def describe(self) -> str:
        parts = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "budgets":
                v = ",".join(str(b) for b in v)
            parts.append(f"{f.name}={_fmt_value(v)}")
        return " ".join(parts)


def _fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    ftype = {f.name: f.type for f in fields(RunConfig)}[name]
    if raw == "" and "Optional" in str(ftype):
        return None
    try:
        if name == "budgets":
            return tuple(_parse_budget(b) for b in raw.split(",") if b.strip())
        if "bool" in str(ftype):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in str(ftype):
            return int(raw)
        if "float" in str(ftype):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def _parse_budget(raw: str) -> int:
    """``1000``, ``1e5`` and ``100000`` all accepted; fractional budgets are not."""
    v = float(raw)
    if not v.is_integer():
        raise ValueError(raw)
    return int(v)


# config-file keys mirror the CLI flags
_KEY_ALIASES = {
    "n": "budgets",
    "reps": "repetitions",
    "seed": "base_seed",
    "h-max": "h_max",
    "grid-file": "grid_file",
    "dump-tree": "dump_tree",
}


def parse_config_text(text: str) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key == "no-reuse":
            out["reuse"] = not _parse_value("reuse", raw)
            continue
        key = _KEY_ALIASES.get(key, key.replace("-", "_"))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def load_config(path, **overrides) -> RunConfig:
    values = parse_config_text(Path(path).read_text())
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


@dataclass
class RunRecord:
    n: int
    rep: int
    seed: int
    regret: float
    rec_x: tuple[float, ...]
    rec_mu: float
    depth: int
    ms: float


@dataclass
class RunResult:
    config: RunConfig
    records: list[RunRecord] = field(default_factory=list)

    def regrets(self, n: int) -> np.ndarray:
        return np.array([r.regret for r in self.records if r.n == n])

    def mean_regret(self, n: int) -> float:
        return float(np.mean(self.regrets(n)))

    def std_regret(self, n: int) -> float:
        return float(np.std(self.regrets(n)))

    def summary(self) -> dict[int, tuple[float, float]]:
        return {n: (self.mean_regret(n), self.std_regret(n)) for n in self.config.budgets}


def _objective_for(config: RunConfig):
    return get_objective(config.objective, config.sigma, config.truncation, path=config.grid_file)


def _one_run(config: RunConfig, objective, n: int, rep: int) -> RunRecord:
    seed = run_seed(config.base_seed, n, rep)
    params = config.params(n)
    start = time.perf_counter()
    rec, trace = run(config.optimizer, objective, params, seed)
    ms = (time.perf_counter() - start) * 1e3 if config.timing else 0.0
    if config.dump_tree:
        out = Path(config.dump_tree)
        out.mkdir(parents=True, exist_ok=True)
        trace.tree.dump(out / f"tree_{config.optimizer}_n{n}_r{rep}.txt")
    return RunRecord(
        n=n,
        rep=rep,
        seed=seed,
        regret=regret(objective, rec),
        rec_x=tuple(float(v) for v in rec.point),
        rec_mu=float(rec.estimated_value),
        depth=trace.deepest_expanded_depth,
        ms=ms,
    )


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def _warm_up(config: RunConfig, objective) -> None:
    # load or compile kernels before anything is timed or fanned out
    params = config.params(min(config.budgets))
    try:
        small = replace(params, n=min(params.n, 1000))
    except ValueError:  # overrides that only make sense at full budget
        small = params
    run(config.optimizer, objective, small, 0)


def run_experiment(config: RunConfig, threads: Optional[int] = None) -> RunResult:
    """Every (budget, repetition) pair once; records ordered by budget then repetition."""
    config.validate()
    objective = _objective_for(config)
    tasks = [(n, r) for n in config.budgets for r in range(config.repetitions)]
    threads = worker_count() if threads is None else max(1, threads)
    if config.timing or threads > 1:
        _warm_up(config, objective)
    if threads == 1 or len(tasks) == 1:
        records = [_one_run(config, objective, n, r) for n, r in tasks]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(lambda nr: _one_run(config, objective, *nr), tasks))
    return RunResult(config, records)


# -- CSV -----------------------------------------------------------------


def _g(v: float) -> str:
    return format(float(v), ".17g")


def _csv_lines(result: RunResult) -> list[str]:
    cfg = result.config
    lines = ["# hiopt regret results", f"# config {cfg.describe()}"]
    for n in cfg.budgets:
        p = cfg.params(n)
        parts = []
        for f in fields(p):
            v = getattr(p, f.name)
            if isinstance(v, SemiMetric):
                parts.append(f"L={_g(v.L)} alpha={_g(v.alpha)}")
            else:
                parts.append(f"{f.name}={_fmt_value(v)}")
        desc = " ".join(parts)
        lines.append(f"# params {desc}")
    lines.append("# summary rows (rep=-1): regret=mean, rec_mu=std (population) over repetitions, ms=mean")
    lines.append(CSV_HEADER)
    prefix = f"{cfg.optimizer},{cfg.objective},{_g(cfg.sigma)}"
    for r in result.records:
        rec_x = ";".join(_g(v) for v in r.rec_x)
        lines.append(f"{prefix},{r.n},{r.rep},{r.seed},{_g(r.regret)},{rec_x},{_g(r.rec_mu)},{r.depth},{_g(r.ms)}")
    for n in cfg.budgets:
        ms = np.mean([r.ms for r in result.records if r.n == n])
        lines.append(f"{prefix},{n},-1,,{_g(result.mean_regret(n))},,{_g(result.std_regret(n))},,{_g(ms)}")
    return lines


def format_csv(result: RunResult) -> str:
    return "\n".join(_csv_lines(result)) + "\n"


def emit_csv(result: RunResult, path) -> Path:
    path = Path(path)
    try:
        path.write_text(format_csv(result))
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def parse_csv(text: str) -> tuple[RunResult, dict[int, tuple[float, float]]]:
    """Inverse of :func:`format_csv`: the result plus its summary rows."""
    config_line = None
    rows = []
    header_seen = False
    for line in text.splitlines():
        if line.startswith("# config "):
            config_line = line[len("# config ") :]
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != CSV_HEADER:
                raise ValueError(f"unexpected CSV header {line!r}")
            header_seen = True
            continue
        rows.append(line.split(","))
    if config_line is None:
        raise ValueError("results CSV lacks the '# config' line")
    values = {}
    for tok in config_line.split(" "):
        key, raw = tok.split("=", 1)
        values[key] = _parse_value(key, raw)
    config = RunConfig(**values)
    records = []
    summary = {}
    for row in rows:
        n, rep = int(row[3]), int(row[4])
        if rep == -1:
            summary[n] = (float(row[6]), float(row[8]))
            continue
        rec_x = tuple(float(v) for v in row[7].split(";")) if row[7] else ()
        records.append(RunRecord(n, rep, int(row[5]), float(row[6]), rec_x, float(row[8]), int(row[9]), float(row[10])))
    return RunResult(config, records), summary


def read_csv(path) -> tuple[RunResult, dict[int, tuple[float, float]]]:
    return parse_csv(Path(path).read_text())


# -- plotting -------------------------------------------------------------


def plot_regret(csv_paths, out_path, title: Optional[str] = None) -> Path:
    """Log-log mean regret against n with +-1 std bars; one line per input file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    floor = 1e-16
    for p in csv_paths:
        result, summary = read_csv(p)
        cfg = result.config
        ns = sorted(summary)
        mean = np.array([summary[n][0] for n in ns])
        std = np.array([summary[n][1] for n in ns])
        lower = np.minimum(std, mean - np.maximum(mean - std, floor))
        label = f"{cfg.optimizer} ({cfg.objective}, sigma={cfg.sigma:g})"
        if cfg.optimizer == "stodoo":
            m = cfg.metric
            label = f"stodoo L={m.L:g} alpha={m.alpha:g} ({cfg.objective}, sigma={cfg.sigma:g})"
        ax.errorbar(ns, np.maximum(mean, floor), yerr=[lower, std], marker="o", capsize=3, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("evaluations n")
    ax.set_ylabel("regret")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg")
    plt.close(fig)
    return out_path


# -- event Monte-Carlo ------------------------------------------------------


@dataclass(frozen=True)
class XiSummary:
    runs: int
    holds: int
    delta: float

    @property
    def fraction(self) -> float:
        return self.holds / self.runs

    @property
    def target(self) -> float:
        return 1.0 - self.delta


def xi_monte_carlo(
    runs: int, n: int, sigma: float, base_seed: int = 0, objective: str = "two-sine", truncation: float = 1.0
) -> XiSummary:
    """Fraction of default-parameter StoSOO runs whose estimates all stayed inside their widths."""
    from .analysis import xi_event_holds
    from .optimizers import default_params, stosoo_run

    if runs < 1:
        raise ConfigError("runs must be >= 1")
    if n < 2:
        raise ConfigError("n must be >= 2")
    obj = get_objective(objective, sigma, truncation)
    params = default_params(n)
    holds = 0
    for r in range(runs):
        _, trace = stosoo_run(obj, params, run_seed(base_seed, n, r))
        holds += xi_event_holds(trace, obj, params)
    return XiSummary(runs, holds, params.delta)
