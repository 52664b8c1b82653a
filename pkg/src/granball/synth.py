"""Deterministic synthetic graph generators for fixtures and benchmarks."""

from __future__ import annotations

import numpy as np

from .graph import Graph

__all__ = ["cycle_graph", "path_graph", "er_graph", "sbm_graph", "sbm_features"]


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycle needs at least 3 nodes")
    ids = np.arange(n, dtype=np.int64)
    return Graph.from_edges(n, np.column_stack([ids, (ids + 1) % n]))


def path_graph(n: int) -> Graph:
    if n < 1:
        raise ValueError("path needs at least 1 node")
    ids = np.arange(n - 1, dtype=np.int64)
    return Graph.from_edges(n, np.column_stack([ids, ids + 1]))


def _distinct_uniform(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    """First ``count`` distinct values of an IID uniform stream over
    range(total): a uniform random count-subset."""
    if count > total:
        raise ValueError("cannot sample more distinct values than exist")
    out = np.empty(0, dtype=np.int64)
    while len(out) < count:
        need = count - len(out)
        draw = rng.integers(0, total, size=need + need // 8 + 16, dtype=np.int64)
        stream = np.concatenate([out, draw])
        _, first = np.unique(stream, return_index=True)
        out = stream[np.sort(first)][:count]
    return out


def _decode_triangular(t: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Invert the row-major enumeration of pairs (i, j), i < j < n."""
    tf = t.astype(np.float64)
    i = np.floor(((2 * n - 1) - np.sqrt((2.0 * n - 1) ** 2 - 8.0 * tf)) / 2.0)
    i = i.astype(np.int64)
    i = np.clip(i, 0, n - 2)
    # float sqrt can land one row off; nudge until offsets bracket t
    for _ in range(3):
        off = i * (2 * n - i - 1) // 2
        too_high = off > t
        i = np.where(too_high, i - 1, i)
        off = i * (2 * n - i - 1) // 2
        nxt = (i + 1) * (2 * n - i - 2) // 2
        too_low = t >= nxt
        i = np.where(too_low, i + 1, i)
    off = i * (2 * n - i - 1) // 2
    j = t - off + i + 1
    return i, j


def er_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p): binomial edge count, then a uniform subset of
    node pairs (exactly the G(n, p) law)."""
    if n < 1:
        raise ValueError("need at least one node")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    total = n * (n - 1) // 2
    m = int(rng.binomial(total, p)) if total else 0
    if m == 0:
        return Graph.from_edges(n, np.empty((0, 2), dtype=np.int64))
    idx = _distinct_uniform(rng, total, m)
    u, v = _decode_triangular(idx, n)
    return Graph.from_edges(n, np.column_stack([u, v]))


def sbm_graph(block_sizes, p_in: float, p_out: float,
              rng: np.random.Generator) -> tuple[Graph, np.ndarray]:
    """Planted-partition stochastic block model.

    Returns the graph and the block label per node (blocks laid out
    contiguously in node-id order).
    """
    block_sizes = [int(s) for s in block_sizes]
    if any(s < 1 for s in block_sizes):
        raise ValueError("block sizes must be positive")
    starts = np.cumsum([0] + block_sizes)
    n = int(starts[-1])
    labels = np.repeat(np.arange(len(block_sizes), dtype=np.int64), block_sizes)
    chunks = []
    for a in range(len(block_sizes)):
        na = block_sizes[a]
        total = na * (na - 1) // 2
        m = int(rng.binomial(total, p_in)) if total else 0
        if m:
            idx = _distinct_uniform(rng, total, m)
            u, v = _decode_triangular(idx, na)
            chunks.append(np.column_stack([u + starts[a], v + starts[a]]))
        for b in range(a + 1, len(block_sizes)):
            nb = block_sizes[b]
            total = na * nb
            m = int(rng.binomial(total, p_out)) if total else 0
            if m:
                idx = _distinct_uniform(rng, total, m)
                u = idx // nb + starts[a]
                v = idx % nb + starts[b]
                chunks.append(np.column_stack([u, v]))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(n, edges), labels


def sbm_features(labels: np.ndarray, num_classes: int, noise: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Block-indicator features perturbed by Gaussian noise."""
    x = np.zeros((len(labels), num_classes), dtype=np.float64)
    x[np.arange(len(labels)), labels] = 1.0
    if noise > 0:
        x += noise * rng.standard_normal(x.shape)
    return x
