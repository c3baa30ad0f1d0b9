"""StoSOO, deterministic SOO and stochastic DOO over one traversal kernel.

All three share the same loop: sweep depths ``0 .. min(depth(T), h_max)``,
take the leaf with the largest b-value at each depth, and if it is at least
the best b-value expanded earlier in this sweep, either sample it (too few
samples yet) or split it.  They differ only in the per-depth sample
threshold and in the constant inside the confidence width.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._kernels import tree_search
from .objectives import Objective
from .partition import Box, SemiMetric, depth_diameters
from .tree import PartitionTree


@dataclass(frozen=True)
class StoSooParams:
    n: int
    k: int
    h_max: int
    delta: float
    K: int = 3
    reuse_middle: bool = True

    def __post_init__(self):
        _check_common(self.n, self.h_max, self.K)
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.n >= 1 and self.k > self.n:
            raise ValueError(f"k={self.k} exceeds the budget n={self.n}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def log_term(self) -> float:
        return math.log(max(self.n, 1) * self.k / self.delta)


@dataclass(frozen=True)
class SooParams:
    n: int
    h_max: int
    K: int = 3
    reuse_middle: bool = True

    def __post_init__(self):
        _check_common(self.n, self.h_max, self.K)

    @classmethod
    def default(cls, n: int, K: int = 3) -> "SooParams":
        return cls(n, max(1, math.ceil(math.sqrt(n))), K)


@dataclass(frozen=True)
class DooParams:
    n: int
    delta: float
    metric: SemiMetric
    h_max: int
    K: int = 3
    reuse_middle: bool = True

    def __post_init__(self):
        _check_common(self.n, self.h_max, self.K)
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")

    @classmethod
    def default(cls, n: int, metric: SemiMetric, K: int = 3) -> "DooParams":
        p = default_params(n)
        return cls(n, p.delta, metric, p.h_max, K)

    @property
    def log_term(self) -> float:
        return math.log(max(self.n, 1) ** 2 / self.delta)


def _check_common(n, h_max, K):
    if n < 0:
        raise ValueError(f"budget n must be >= 0, got {n}")
    if h_max < 0:
        raise ValueError(f"h_max must be >= 0, got {h_max}")
    if K < 2:
        raise ValueError(f"branching factor K must be >= 2, got {K}")


def default_params(n: int) -> StoSooParams:
    """k = ceil(n / ln^3 n), h_max = ceil(sqrt(n / k)), delta = 1/sqrt(n), K = 3."""
    if n < 2:
        raise ValueError(f"default parameters need n >= 2, got {n}")
    k = min(max(math.ceil(n / math.log(n) ** 3), 1), n)
    h_max = math.ceil(math.sqrt(n / k))
    return StoSooParams(n=n, k=k, h_max=h_max, delta=1.0 / math.sqrt(n), K=3, reuse_middle=True)


def doo_thresholds(params: DooParams, objective: Objective) -> np.ndarray:
    """Samples needed before a depth-h node is split: ceil(ln(n^2/delta) / (2 w(h)^2))."""
    w = depth_diameters(objective.domain, params.K, params.metric, params.h_max)
    cap = params.n + 1
    out = np.empty(params.h_max + 1, dtype=np.int64)
    for h, wh in enumerate(w):
        if wh <= 0.0:
            out[h] = cap
            continue
        need = params.log_term / (2.0 * wh * wh)
        out[h] = cap if need >= cap else max(1, math.ceil(need))
    return out


@dataclass(frozen=True)
class Recommendation:
    point: np.ndarray
    node: tuple[int, int]
    estimated_value: float
    defined: bool = True


@dataclass
class RunTrace:
    """Everything a run did, in order.

    Evaluation ``t`` sampled node ``eval_node[t]`` and got ``eval_reward[t]``;
    expansion ``e`` split node ``exp_node[e]`` after ``exp_time[e]``
    evaluations.  Node ids are kernel rows; ``tree`` builds the ``(h, i)``
    view on first access.
    """

    K: int
    reuse_middle: bool
    eval_node: np.ndarray
    eval_reward: np.ndarray
    exp_node: np.ndarray
    exp_time: np.ndarray
    depth: np.ndarray
    parent: np.ndarray
    slot: np.ndarray
    rep: np.ndarray
    lo: np.ndarray = field(repr=False)
    hi: np.ndarray = field(repr=False)
    pulls: np.ndarray = field(repr=False)
    sums: np.ndarray = field(repr=False)
    expanded: np.ndarray = field(repr=False)
    domain: Optional[Box] = field(default=None, repr=False)

    @property
    def n_evaluations(self) -> int:
        return int(self.eval_node.shape[0])

    @property
    def deepest_expanded_depth(self) -> int:
        d = self.depth[self.expanded]
        return int(d.max()) if d.size else -1

    @functools.cached_property
    def _keys(self) -> list[tuple[int, int]]:
        index = [0] * self.depth.shape[0]
        keys = []
        K = self.K
        for j, (p, c, h) in enumerate(zip(self.parent.tolist(), self.slot.tolist(), self.depth.tolist())):
            if p >= 0:
                index[j] = K * index[p] + c
            keys.append((h, index[j]))
        return keys

    @functools.cached_property
    def tree(self) -> PartitionTree:
        domain = self.domain if self.domain is not None else Box(self.lo[0], self.hi[0])
        arrays = (self.lo, self.hi, self.rep, self.depth, self.parent, self.slot, self.pulls, self.sums, self.expanded)
        return PartitionTree.from_arrays(domain, self.K, *arrays)

    def key(self, node_id: int) -> tuple[int, int]:
        return self._keys[node_id]

    def evaluations(self):
        for t, (j, r) in enumerate(zip(self.eval_node, self.eval_reward)):
            yield t, self.key(int(j)), self.rep[j], float(r)

    def expansions(self):
        for j, t in zip(self.exp_node, self.exp_time):
            yield int(t), self.key(int(j))

    def head(self, m: int) -> "RunTrace":
        """The trace truncated to its first ``m`` evaluations (tree left as is)."""
        keep = self.exp_time < m
        return replace(
            self,
            eval_node=self.eval_node[:m],
            eval_reward=self.eval_reward[:m],
            exp_node=self.exp_node[keep],
            exp_time=self.exp_time[keep],
        )

    def recommendation(self) -> Recommendation:
        """Same rule as :func:`recommend`, read straight off the kernel arrays."""
        exp = np.flatnonzero(self.expanded)
        if exp.size == 0:
            T = int(self.pulls[0])
            mu = float(self.sums[0]) / T if T else math.nan
            return Recommendation(self.rep[0].copy(), (0, 0), mu, T > 0)
        h = int(self.depth[exp].max())
        cand = exp[self.depth[exp] == h]
        mu = self.sums[cand] / self.pulls[cand]
        ties = cand[mu == mu.max()]
        j = int(min(ties, key=lambda q: self._keys[q][1]))
        return Recommendation(self.rep[j].copy(), self._keys[j], float(self.sums[j]) / int(self.pulls[j]), True)


def recommend(tree: PartitionTree) -> Recommendation:
    """Best empirical mean among expanded nodes at the deepest expanded depth.

    Falls back to the root when nothing was expanded; ``defined`` is False if
    the root was never sampled either.
    """
    h = tree.deepest_expanded_depth
    if h < 0:
        root = tree[(0, 0)]
        return Recommendation(root.cell.representative, (0, 0), root.stats.mean, root.stats.pulls > 0)
    best_key, best_mu = None, -math.inf
    for key in tree.expanded_at_depth(h):  # ascending index: first max wins ties
        mu = tree[key].stats.mean
        if best_key is None or mu > best_mu:
            best_key, best_mu = key, mu
    node = tree[best_key]
    return Recommendation(node.cell.representative, best_key, best_mu, True)


def _run(
    objective: Objective, n, K, h_max, thresholds, log_term, reuse, rng_seed, eval_on_create=False
) -> tuple[Recommendation, RunTrace]:
    rng = np.random.default_rng(rng_seed)
    noise = objective.noise.sample(rng, n)
    lo, hi, rep, depth, parent, slot, pulls, sums, expanded, en, er, xn, xt = tree_search(
        objective.domain.lower,
        objective.domain.upper,
        K,
        n,
        thresholds,
        log_term,
        reuse,
        objective.point_fn,
        objective.theta,
        noise,
        eval_on_create,
    )
    if np.isnan(er).any():
        t = int(np.flatnonzero(np.isnan(er))[0])
        raise FloatingPointError(f"objective {objective.name!r} returned NaN at evaluation {t} (x={rep[en[t]].tolist()})")
    trace = RunTrace(
        K, bool(reuse), en, er, xn, xt, depth, parent, slot, rep, lo, hi, pulls, sums, expanded, objective.domain
    )
    return trace.recommendation(), trace


def stosoo_run(objective: Objective, params: StoSooParams, rng_seed: int = 0) -> tuple[Recommendation, RunTrace]:
    """Stochastic simultaneous optimistic optimization with a budget of ``params.n`` samples."""
    thresholds = np.full(params.h_max + 1, params.k, dtype=np.int64)
    return _run(
        objective, params.n, params.K, params.h_max, thresholds, params.log_term, params.reuse_middle, rng_seed
    )


def soo_run(objective: Objective, params: SooParams, rng_seed: int = 0) -> tuple[Recommendation, RunTrace]:
    """Deterministic SOO: zero-width b-values, one exact evaluation per node.

    Children are evaluated the moment they are created.  (Running the
    stochastic loop with k=1 instead makes each depth wait one traversal per
    fresh child, which turns the search breadth-first.)
    """
    if not objective.noise.is_zero:
        raise ValueError("SOO needs a noiseless objective")
    thresholds = np.ones(params.h_max + 1, dtype=np.int64)
    return _run(
        objective, params.n, params.K, params.h_max, thresholds, 0.0, params.reuse_middle, rng_seed, eval_on_create=True
    )


def stodoo_run(objective: Objective, params: DooParams, rng_seed: int = 0) -> tuple[Recommendation, RunTrace]:
    """Stochastic DOO: split a depth-h node once its confidence width drops below w(h)."""
    thresholds = doo_thresholds(params, objective)
    return _run(
        objective, params.n, params.K, params.h_max, thresholds, params.log_term, params.reuse_middle, rng_seed
    )


OPTIMIZERS = ("stosoo", "soo", "stodoo")


def run(optimizer: str, objective: Objective, params, rng_seed: int = 0) -> tuple[Recommendation, RunTrace]:
    fn = {"stosoo": stosoo_run, "soo": soo_run, "stodoo": stodoo_run}.get(optimizer)
    if fn is None:
        raise ValueError(f"unknown optimizer {optimizer!r}; choose from {', '.join(OPTIMIZERS)}")
    return fn(objective, params, rng_seed)


def params_for(optimizer: str, n: int, *, metric: Optional[SemiMetric] = None, **overrides):
    """Default parameters for ``optimizer`` at budget ``n`` with keyword overrides applied."""
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if optimizer == "stosoo":
        if n >= 2:
            base = default_params(n)
        else:
            base = StoSooParams(n=n, k=1, h_max=1, delta=0.5)
        fields = dict(n=n, k=base.k, h_max=base.h_max, delta=base.delta, K=base.K, reuse_middle=base.reuse_middle)
        fields.update(overrides)
        if n >= 1 and "k" not in overrides:
            fields["k"] = min(fields["k"], n)
        return StoSooParams(**fields)
    if optimizer == "soo":
        overrides.pop("k", None)
        overrides.pop("delta", None)
        base = SooParams.default(max(n, 1), overrides.get("K", 3))
        fields = dict(n=n, h_max=base.h_max, K=base.K, reuse_middle=base.reuse_middle)
        fields.update(overrides)
        return SooParams(**fields)
    if optimizer == "stodoo":
        if metric is None:
            raise ValueError("stochastic DOO needs a metric (L, alpha)")
        overrides.pop("k", None)
        base = default_params(max(n, 2))
        fields = dict(n=n, delta=base.delta, metric=metric, h_max=base.h_max, K=base.K, reuse_middle=True)
        fields.update(overrides)
        return DooParams(**fields)
    raise ValueError(f"unknown optimizer {optimizer!r}; choose from {', '.join(OPTIMIZERS)}")
