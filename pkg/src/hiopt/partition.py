"""Hierarchical K-ary partition of a box domain.

Cells are addressed by ``(depth, index)``; the children of ``(h, i)`` are
``(h + 1, K*i + c)`` for ``c = 0 .. K-1``, ordered along the split axis.
Each split cuts the longest side of the cell (lowest axis on ties) into K
equal slabs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).reshape(-1)
        hi = np.array(self.upper, dtype=np.float64).reshape(-1)
        if lo.size == 0 or lo.shape != hi.shape:
            raise ValueError(f"box bounds must be nonempty and of equal length, got {lo.shape} and {hi.shape}")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo >= hi):
            raise ValueError(f"invalid box: lower {lo.tolist()} must be strictly below upper {hi.tolist()}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def _trusted(cls, lower: np.ndarray, upper: np.ndarray) -> "Box":
        # kernel output: already valid, float64 and read-only
        box = object.__new__(cls)
        object.__setattr__(box, "lower", lower)
        object.__setattr__(box, "upper", upper)
        return box

    @classmethod
    def unit(cls, dim: int = 1) -> "Box":
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def sides(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return (self.lower + self.upper) / 2.0

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, x, closed: bool = True) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if closed:
            return bool(np.all(x >= self.lower) and np.all(x <= self.upper))
        return bool(np.all(x > self.lower) and np.all(x < self.upper))

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True, eq=False)
class Cell:
    depth: int
    index: int
    box: Box
    representative: np.ndarray = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, Cell):
            return NotImplemented
        return (
            self.depth == other.depth
            and self.index == other.index
            and self.box == other.box
            and np.array_equal(self.representative, other.representative)
        )

    __hash__ = None


@dataclass(frozen=True)
class SemiMetric:
    """``l(x, y) = L * ||x - y||_inf ** alpha``."""

    L: float
    alpha: float

    def __post_init__(self):
        if not (self.L >= 0.0 and np.isfinite(self.L)):
            raise ValueError(f"metric scale L must be finite and >= 0, got {self.L}")
        if not (self.alpha > 0.0 and np.isfinite(self.alpha)):
            raise ValueError(f"metric exponent alpha must be finite and > 0, got {self.alpha}")

    def __call__(self, x, y) -> float:
        d = np.max(np.abs(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)))
        return float(self.L * d**self.alpha)


def root_cell(domain: Box) -> Cell:
    if not isinstance(domain, Box):
        domain = Box(*domain)
    rep = domain.center
    rep.setflags(write=False)
    return Cell(0, 0, domain, rep)


def split_axis(sides: np.ndarray) -> int:
    # np.argmax returns the first maximum: ties go to the lowest axis
    return int(np.argmax(sides))


def split(cell: Cell, K: int) -> list[Cell]:
    """Children of ``cell``, left to right along the split axis.

    For odd K the middle child reuses the parent's representative array value
    exactly, so samples taken at the parent stay valid for it.
    """
    if int(K) != K or K < 2:
        raise ValueError(f"branching factor K must be an integer >= 2, got {K}")
    K = int(K)
    lo, hi = cell.box.lower, cell.box.upper
    d = split_axis(hi - lo)
    width = (hi[d] - lo[d]) / K
    children = []
    for c in range(K):
        clo = lo.copy()
        chi = hi.copy()
        clo[d] = lo[d] + c * width
        chi[d] = lo[d] + (c + 1) * width if c < K - 1 else hi[d]
        box = Box(clo, chi)
        if K % 2 == 1 and c == K // 2:
            rep = cell.representative.copy()
        else:
            rep = box.center
        rep.setflags(write=False)
        children.append(Cell(cell.depth + 1, K * cell.index + c, box, rep))
    return children


def cell_l_diameter(cell: Cell, metric: SemiMetric) -> float:
    """Exact ``sup_{x in cell} l(representative, x)`` for a max-norm power metric."""
    if not isinstance(metric, SemiMetric):
        raise TypeError(f"unsupported metric {metric!r}; expected SemiMetric(L, alpha)")
    if metric.L == 0.0:
        return 0.0
    rep = cell.representative
    reach = np.maximum(rep - cell.box.lower, cell.box.upper - rep)
    return float(metric.L * float(np.max(reach)) ** metric.alpha)


def depth_diameters(domain: Box, K: int, metric: SemiMetric, h_max: int) -> np.ndarray:
    """``w(h)`` for ``h = 0 .. h_max``.

    All cells of one depth share a shape, so following the first child down
    from the root is enough.
    """
    cell = root_cell(domain)
    out = np.empty(h_max + 1)
    for h in range(h_max + 1):
        out[h] = cell_l_diameter(cell, metric)
        if h < h_max:
            cell = split(cell, K)[0]
    return out
