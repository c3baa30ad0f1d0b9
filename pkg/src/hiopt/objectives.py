"""Test functions, the noise channel, and the objective container.

An objective carries two views of the same function: ``point_fn(x, theta)``
evaluates one point (compiled with numba when enabled, so the traversal kernel
can call it directly) and ``batch_fn(X, theta)`` evaluates an ``(m, D)`` array
with numpy for grid scans.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ._accel import jit_point
from .partition import Box

MAX_GRID_POINTS = 10**8
DEFAULT_GRID = 10**7
_CHUNK = 1 << 20


# -- scalar kernels --------------------------------------------------------


def _two_sine_point(x, theta):
    return 0.5 * (math.sin(13.0 * x[0]) * math.sin(27.0 * x[0])) + 0.5


def _garland_point(x, theta):
    v = x[0]
    return 4.0 * v * (1.0 - v) * (0.75 + 0.25 * (1.0 - math.sqrt(abs(math.sin(60.0 * v)))))


def _envelope_point(x, theta):
    v = x[0]
    if v == 0.0:
        return 1.0
    s = math.sqrt(v)
    return 1.0 - s + (-v * v + s) * (math.sin(1.0 / (v * v)) + 1.0) / 2.0


def _tabulated_point(x, theta):
    # theta = [xs..., ys...]
    m = theta.shape[0] // 2
    return np.interp(x[0], theta[:m], theta[m:])


_two_sine_point = jit_point(_two_sine_point)
_garland_point = jit_point(_garland_point)
_envelope_point = jit_point(_envelope_point)
_tabulated_point = jit_point(_tabulated_point)


# -- vectorized twins --------------------------------------------------------


def _two_sine_batch(X, theta):
    v = X[:, 0]
    return 0.5 * (np.sin(13.0 * v) * np.sin(27.0 * v)) + 0.5


def _garland_batch(X, theta):
    v = X[:, 0]
    return 4.0 * v * (1.0 - v) * (0.75 + 0.25 * (1.0 - np.sqrt(np.abs(np.sin(60.0 * v)))))


def _envelope_batch(X, theta):
    v = X[:, 0]
    out = np.ones_like(v)
    nz = v != 0.0
    w = v[nz]
    s = np.sqrt(w)
    out[nz] = 1.0 - s + (-w * w + s) * (np.sin(1.0 / (w * w)) + 1.0) / 2.0
    return out


def _tabulated_batch(X, theta):
    m = theta.shape[0] // 2
    return np.interp(X[:, 0], theta[:m], theta[m:])


def two_sine_product(x: float) -> float:
    """``0.5 * sin(13x) * sin(27x) + 0.5`` on [0, 1]."""
    return float(_two_sine_point(np.array([x], dtype=np.float64), _EMPTY))


def garland(x: float) -> float:
    """``4x(1-x) * (3/4 + 1/4 * (1 - sqrt|sin 60x|))`` on [0, 1]."""
    return float(_garland_point(np.array([x], dtype=np.float64), _EMPTY))


def envelope_mismatch(x: float) -> float:
    """Square-root lower envelope, quadratic upper envelope around x* = 0.

    Takes its limit value 1 at ``x = 0``.
    """
    return float(_envelope_point(np.array([x], dtype=np.float64), _EMPTY))


_EMPTY = np.zeros(0, dtype=np.float64)


# -- noise -------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseChannel:
    """Additive zero-mean noise.

    ``truncated_gaussian`` draws N(0, sigma^2) and rejects draws outside
    ``[-bound, bound]``; the symmetric cut keeps the mean at exactly zero.
    """

    kind: str = "zero"
    sigma: float = 0.0
    bound: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "truncated_gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not (self.sigma >= 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma}")
        if not (self.bound > 0.0 and math.isfinite(self.bound)):
            raise ValueError(f"truncation bound must be finite and > 0, got {self.bound}")

    @classmethod
    def gaussian(cls, sigma: float, bound: float = 1.0) -> "NoiseChannel":
        if sigma == 0.0:
            return cls("zero", 0.0, bound)
        return cls("truncated_gaussian", float(sigma), float(bound))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.sigma == 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` draws.  The first ``m`` draws do not depend on ``size``."""
        if self.is_zero:
            return np.zeros(size)
        out = np.empty(size)
        filled = 0
        while filled < size:
            need = size - filled
            z = self.sigma * rng.standard_normal(need + need // 4 + 16)
            z = z[np.abs(z) <= self.bound]
            take = min(z.size, need)
            out[filled : filled + take] = z[:take]
            filled += take
        return out


# -- objective ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Objective:
    name: str
    domain: Box
    point_fn: Callable
    batch_fn: Optional[Callable] = None
    theta: np.ndarray = field(default_factory=lambda: _EMPTY, repr=False)
    noise: NoiseChannel = NoiseChannel()
    known_max: Optional[tuple[np.ndarray, float]] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def true_f(self, x) -> float:
        # compiled kernels take writable arrays only
        x = np.array(x, dtype=np.float64, order="C").reshape(self.dim)
        return float(self.point_fn(x, self.theta))

    def batch(self, X) -> np.ndarray:
        X = np.array(X, dtype=np.float64, order="C").reshape(-1, self.dim)
        if self.batch_fn is not None:
            return np.asarray(self.batch_fn(X, self.theta), dtype=np.float64)
        return np.array([self.point_fn(row, self.theta) for row in X], dtype=np.float64)

    def with_noise(self, sigma: float, bound: float = 1.0) -> "Objective":
        return replace(self, noise=NoiseChannel.gaussian(sigma, bound))

    def with_known_max(self, points_per_dim: int = DEFAULT_GRID) -> "Objective":
        return replace(self, known_max=grid_optimum(self, points_per_dim))

    @classmethod
    def from_callable(cls, name: str, fn: Callable, domain: Box, **kw) -> "Objective":
        """Wrap a plain ``fn(x) -> float`` (runs through the interpreted kernel)."""

        def point(x, theta):
            return fn(x)

        return cls(name, domain, point, **kw)


def evaluate_noisy(obj: Objective, x, rng: np.random.Generator) -> float:
    value = obj.true_f(x)
    if obj.noise.is_zero:
        return value
    return value + float(obj.noise.sample(rng, 1)[0])


def grid_optimum(obj: Objective, points_per_dim: int) -> tuple[np.ndarray, float]:
    """Max of the true function over a uniform grid that includes the box corners."""
    if points_per_dim < 2:
        raise ValueError("points_per_dim must be >= 2")
    D = obj.dim
    total = points_per_dim**D
    if total > MAX_GRID_POINTS:
        raise ValueError(f"grid of {points_per_dim}^{D} = {total} points exceeds {MAX_GRID_POINTS}")
    axes = [np.linspace(obj.domain.lower[d], obj.domain.upper[d], points_per_dim) for d in range(D)]
    best_val = -np.inf
    best_flat = 0
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, (points_per_dim,) * D)
        X = np.stack([axes[d][idx[d]] for d in range(D)], axis=1)
        vals = obj.batch(X)
        q = int(np.argmax(vals))
        if vals[q] > best_val:
            best_val = float(vals[q])
            best_flat = int(flat[q])
    idx = np.unravel_index(best_flat, (points_per_dim,) * D)
    point = np.array([axes[d][idx[d]] for d in range(D)])
    # report the scalar evaluation so regret at this point is exactly zero
    return point, obj.true_f(point)


def refine_optimum(obj: Objective, point, spacing, levels: int = 2, points: int = 10**5) -> tuple[np.ndarray, float]:
    """Zoom grid scans around ``point``, each over +-2 spacings of the previous grid.

    A plain grid misses the top of non-smooth peaks by roughly the function's
    modulus of continuity at the grid spacing; this recovers them.
    """
    D = obj.dim
    per_dim = max(5, int(round(points ** (1.0 / D))))
    best = np.array(point, dtype=np.float64).reshape(D)
    best_val = obj.true_f(best)
    step = np.broadcast_to(np.asarray(spacing, dtype=np.float64), (D,)).copy()
    for _ in range(levels):
        lo = np.maximum(best - 2 * step, obj.domain.lower)
        hi = np.minimum(best + 2 * step, obj.domain.upper)
        axes = [np.linspace(lo[d], hi[d], per_dim) for d in range(D)]
        X = np.stack([a.reshape(-1) for a in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = obj.batch(X)
        q = int(np.argmax(vals))
        cand = X[q].copy()
        cand_val = obj.true_f(cand)
        if cand_val > best_val:
            best, best_val = cand, cand_val
        step = (hi - lo) / (per_dim - 1)
    return best, best_val


def tabulated(xs, ys, name: str = "custom-grid") -> Objective:
    """Piecewise-linear objective through the points ``(xs[j], ys[j])``."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise ValueError("tabulated objective needs two equal-length columns with >= 2 rows")
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    if np.any(np.diff(xs) <= 0):
        raise ValueError("tabulated x values must be distinct")
    return Objective(name, Box([xs[0]], [xs[-1]]), _tabulated_point, _tabulated_batch, np.concatenate([xs, ys]))


def load_tabulated(path) -> Objective:
    """Read a two-column ``x,f(x)`` CSV (optional header, ``#`` comments)."""
    xs, ys = [], []
    first = True
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                x, y = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if first:
                    first = False
                    continue  # header line
                raise ValueError(f"{path}: malformed row {row!r}") from None
            first = False
            xs.append(x)
            ys.append(y)
    return tabulated(xs, ys, name="custom-grid")


_BUILTIN = {
    "two-sine": (_two_sine_point, _two_sine_batch),
    "garland": (_garland_point, _garland_batch),
    "envelope-mismatch": (_envelope_point, _envelope_batch),
}

OBJECTIVE_NAMES = (*_BUILTIN, "custom-grid")


@functools.lru_cache(maxsize=None)
def _cached_max(name: str, points: int) -> tuple[tuple[float, ...], float]:
    obj = _bare(name)
    point, _ = grid_optimum(obj, points)
    point, value = refine_optimum(obj, point, obj.domain.sides / (points - 1))
    return tuple(point.tolist()), value


def _bare(name: str) -> Objective:
    point_fn, batch_fn = _BUILTIN[name]
    return Objective(name, Box.unit(1), point_fn, batch_fn)


def get_objective(
    name: str,
    sigma: float = 0.0,
    bound: float = 1.0,
    *,
    grid: int = DEFAULT_GRID,
    path=None,
) -> Objective:
    """Named objective with its noise channel and grid-oracle maximum attached."""
    if name == "custom-grid":
        if path is None:
            raise ValueError("custom-grid objective needs a CSV path")
        obj = load_tabulated(Path(path)).with_noise(sigma, bound)
        # the max of a piecewise-linear function sits on a knot
        m = obj.theta.shape[0] // 2
        q = int(np.argmax(obj.theta[m:]))
        return replace(obj, known_max=(np.array([obj.theta[q]]), float(obj.theta[m + q])))
    if name not in _BUILTIN:
        raise ValueError(f"unknown objective {name!r}; choose from {', '.join(OBJECTIVE_NAMES)}")
    point, value = _cached_max(name, grid)
    return replace(_bare(name), noise=NoiseChannel.gaussian(sigma, bound), known_max=(np.array(point), value))
