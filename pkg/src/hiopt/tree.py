"""Statistics-carrying partition tree."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .partition import Box, Cell, root_cell, split


@dataclass
class NodeStats:
    pulls: int = 0
    reward_sum: float = 0.0
    expanded: bool = False

    @property
    def mean(self) -> float:
        """Empirical mean; NaN while the node has no samples."""
        if self.pulls == 0:
            return math.nan
        return self.reward_sum / self.pulls


@dataclass
class Node:
    cell: Cell
    stats: NodeStats


def confidence_width(pulls: int, log_term: float) -> float:
    if pulls == 0:
        return math.inf
    return math.sqrt(log_term / (2.0 * pulls))


def b_value(stats: NodeStats, n: int, k: int, delta: float) -> float:
    """Upper confidence bound ``mean + sqrt(log(n k / delta) / (2 T))``; +inf if unsampled."""
    if n < 1 or k < 1:
        raise ValueError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if stats.pulls == 0:
        return math.inf
    return stats.reward_sum / stats.pulls + math.sqrt(math.log(n * k / delta) / (2.0 * stats.pulls))


class PartitionTree:
    """K-ary tree over a box, keyed by ``(depth, index)``."""

    def __init__(self, domain: Box, K: int = 3):
        if int(K) != K or K < 2:
            raise ValueError(f"branching factor K must be an integer >= 2, got {K}")
        self.K = int(K)
        self.domain = domain
        self.nodes: dict[tuple[int, int], Node] = {(0, 0): Node(root_cell(domain), NodeStats())}
        self.deepest_expanded_depth = -1
        self.depth = 0

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, key) -> bool:
        return tuple(key) in self.nodes

    def __getitem__(self, key) -> Node:
        return self.nodes[tuple(key)]

    def _leaf(self, key) -> Node:
        key = tuple(key)
        node = self.nodes.get(key)
        if node is None:
            raise KeyError(f"node {key} is not in the tree")
        if node.stats.expanded:
            raise ValueError(f"node {key} is already expanded")
        return node

    def record_reward(self, key, reward: float) -> None:
        stats = self._leaf(key).stats
        stats.pulls += 1
        stats.reward_sum += float(reward)

    def expand_node(self, key, reuse_middle: bool = True) -> list[tuple[int, int]]:
        """Replace a leaf by its K children and return their keys.

        With ``reuse_middle`` and odd K the middle child starts with a copy of
        the parent's samples (both share one representative point).
        """
        node = self._leaf(key)
        h = node.cell.depth
        keys = []
        for c, child in enumerate(split(node.cell, self.K)):
            stats = NodeStats()
            if reuse_middle and self.K % 2 == 1 and c == self.K // 2:
                stats.pulls = node.stats.pulls
                stats.reward_sum = node.stats.reward_sum
            ck = (child.depth, child.index)
            self.nodes[ck] = Node(child, stats)
            keys.append(ck)
        node.stats.expanded = True
        self.deepest_expanded_depth = max(self.deepest_expanded_depth, h)
        self.depth = max(self.depth, h + 1)
        return keys

    def leaves(self) -> list[tuple[int, int]]:
        return sorted(k for k, v in self.nodes.items() if not v.stats.expanded)

    def leaves_at_depth(self, h: int) -> list[tuple[int, int]]:
        if h < 0:
            raise ValueError("depth must be >= 0")
        return sorted(k for k, v in self.nodes.items() if k[0] == h and not v.stats.expanded)

    def expanded_at_depth(self, h: int) -> list[tuple[int, int]]:
        return sorted(k for k, v in self.nodes.items() if k[0] == h and v.stats.expanded)

    @property
    def n_expanded(self) -> int:
        return sum(1 for v in self.nodes.values() if v.stats.expanded)

    # -- conversion from the array kernel -----------------------------------

    @classmethod
    def from_arrays(cls, domain: Box, K: int, lo, hi, rep, depth, parent, slot, pulls, sums, expanded):
        """Rebuild from kernel output; node rows are in creation order."""
        tree = cls.__new__(cls)
        tree.K = int(K)
        tree.domain = domain
        tree.nodes = {}
        m = len(depth)
        index = [0] * m
        keys = [None] * m
        lo, hi, rep = (np.array(a, dtype=np.float64) for a in (lo, hi, rep))
        for a in (lo, hi, rep):
            a.setflags(write=False)
        for j in range(m):
            p = int(parent[j])
            index[j] = 0 if p < 0 else tree.K * index[p] + int(slot[j])
            key = (int(depth[j]), index[j])
            keys[j] = key
            cell = Cell(key[0], key[1], Box._trusted(lo[j], hi[j]), rep[j])
            tree.nodes[key] = Node(cell, NodeStats(int(pulls[j]), float(sums[j]), bool(expanded[j])))
        exp_depths = depth[expanded]
        tree.deepest_expanded_depth = int(exp_depths.max()) if exp_depths.size else -1
        tree.depth = int(depth.max()) if m else 0
        tree._keys = keys
        return tree

    # -- text dump -----------------------------------------------------------

    def dumps(self) -> str:
        """One node per line: ``h i pulls mean expanded lower... upper...``."""
        D = self.domain.dim
        buf = io.StringIO()
        cols = ["h", "i", "pulls", "mean", "expanded"]
        cols += [f"lo{d}" for d in range(D)] + [f"hi{d}" for d in range(D)]
        buf.write("# " + " ".join(cols) + "\n")
        for key in sorted(self.nodes):
            node = self.nodes[key]
            s = node.stats
            fields = [str(key[0]), str(key[1]), str(s.pulls), repr(s.mean), "1" if s.expanded else "0"]
            fields += [repr(float(v)) for v in node.cell.box.lower]
            fields += [repr(float(v)) for v in node.cell.box.upper]
            buf.write(" ".join(fields) + "\n")
        return buf.getvalue()

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())


def parse_dump(text: str) -> list[dict]:
    rows = []
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        D = (len(parts) - 5) // 2
        rows.append(
            {
                "h": int(parts[0]),
                "i": int(parts[1]),
                "pulls": int(parts[2]),
                "mean": float(parts[3]),
                "expanded": parts[4] == "1",
                "lower": np.array([float(v) for v in parts[5 : 5 + D]]),
                "upper": np.array([float(v) for v in parts[5 + D :]]),
            }
        )
    return rows
