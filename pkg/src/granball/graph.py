"""Immutable CSR graph plus subgraph extraction and Laplacian quadratic forms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Graph", "induced_subgraph", "laplacian_quadratic"]


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, unweighted simple graph in compressed sparse row form.

    ``offsets`` has length ``num_nodes + 1``; ``neighbors`` stores both
    directions of every undirected edge, sorted ascending within each
    node's slice. No self-loops, no duplicate entries. Instances are
    immutable after construction and safe to share across threads.
    """

    offsets: np.ndarray
    neighbors: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.offsets) - 1

    @property
    def num_edges(self) -> int:
        """Number of undirected edges, each counted once."""
        return len(self.neighbors) // 2

    def degree(self, v: int) -> int:
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range [0, {self.num_nodes})")
        return int(self.offsets[v + 1] - self.offsets[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, v: int) -> np.ndarray:
        if not 0 <= v < self.num_nodes:
            raise IndexError(f"node id {v} out of range [0, {self.num_nodes})")
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    @cached_property
    def edge_sources(self) -> np.ndarray:
        """Source node of every CSR entry (same length as ``neighbors``)."""
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64), self.degrees())

    @classmethod
    def from_edges(cls, num_nodes: int, edges) -> "Graph":
        """Build a simple graph from an iterable/array of (u, v) pairs.

        Self-loops are dropped; duplicate edges (in either direction)
        collapse to one undirected edge.
        """
        if num_nodes <= 0:
            raise ValueError("graph must have at least one node")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= num_nodes:
                raise ValueError("edge endpoint out of range")
            lo = edges.min(axis=1)
            hi = edges.max(axis=1)
            keep = lo != hi
            key = np.unique(lo[keep] * np.int64(num_nodes) + hi[keep])
            u = key // num_nodes
            v = key % num_nodes
        else:
            u = v = np.empty(0, dtype=np.int64)
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        offsets = np.zeros(num_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=num_nodes), out=offsets[1:])
        return cls(offsets=offsets, neighbors=dst[order])

    def edge_array(self) -> np.ndarray:
        """All undirected edges as an (E, 2) array with u < v, sorted."""
        mask = self.edge_sources < self.neighbors
        return np.column_stack([self.edge_sources[mask], self.neighbors[mask]])

    def validate(self) -> None:
        """Check every structural invariant; raise ValueError on violation."""
        n = self.num_nodes
        if n <= 0:
            raise ValueError("empty graph")
        if self.offsets[0] != 0 or self.offsets[-1] != len(self.neighbors):
            raise ValueError("offsets do not span the neighbor array")
        if np.any(np.diff(self.offsets) < 0):
            raise ValueError("offsets not nondecreasing")
        if len(self.neighbors) and (self.neighbors.min() < 0 or self.neighbors.max() >= n):
            raise ValueError("neighbor id out of range")
        if np.any(self.edge_sources == self.neighbors):
            raise ValueError("self-loop present")
        for v in range(n):
            nb = self.neighbors_of(v)
            if len(nb) > 1 and np.any(np.diff(nb) <= 0):
                raise ValueError(f"neighbors of {v} not strictly increasing")
        # symmetry: the multiset of (u, v) equals the multiset of (v, u)
        fwd = self.edge_sources * np.int64(n) + self.neighbors
        rev = self.neighbors * np.int64(n) + self.edge_sources
        if not np.array_equal(np.sort(fwd), np.sort(rev)):
            raise ValueError("adjacency not symmetric")


def _induced_csr(g: Graph, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR of the subgraph induced by sorted, distinct ``nodes``.

    Returned neighbor ids are local (positions within ``nodes``).
    """
    deg = g.offsets[nodes + 1] - g.offsets[nodes]
    total = int(deg.sum())
    if total == 0:
        return np.zeros(len(nodes) + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    starts = np.cumsum(deg) - deg
    gather = (np.arange(total, dtype=np.int64)
              - np.repeat(starts, deg)
              + np.repeat(g.offsets[nodes], deg))
    nbrs = g.neighbors[gather]
    rows = np.repeat(np.arange(len(nodes), dtype=np.int64), deg)
    loc = np.searchsorted(nodes, nbrs)
    loc[loc >= len(nodes)] = len(nodes) - 1
    inside = nodes[loc] == nbrs
    rows = rows[inside]
    cols = loc[inside]
    offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=len(nodes)), out=offsets[1:])
    return offsets, cols


def induced_subgraph(g: Graph, nodes) -> tuple[Graph, dict[int, int]]:
    """Subgraph on ``nodes`` plus the order-preserving old->new id map.

    Keeps exactly the edges with both endpoints in ``nodes``.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("node set must be nonempty")
    if nodes.min() < 0 or nodes.max() >= g.num_nodes:
        raise ValueError("node id out of range")
    nodes = np.sort(nodes)
    if np.any(np.diff(nodes) == 0):
        raise ValueError("duplicate node id")
    offsets, cols = _induced_csr(g, nodes)
    sub = Graph(offsets=offsets, neighbors=cols)
    return sub, {int(old): new for new, old in enumerate(nodes)}


def laplacian_quadratic(g: Graph, x) -> float:
    """Sum of (x_u - x_v)^2 over undirected edges: the quadratic form of D - A."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (g.num_nodes,):
        raise ValueError(f"expected vector of length {g.num_nodes}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite entry in x")
    d = x[g.edge_sources] - x[g.neighbors]
    return 0.5 * float(d @ d)
