"""Granular-ball quality evaluation, adaptive binary splitting, and the
end-to-end coarsening driver.

A ball is a set of nodes treated as one coarse unit. The driver seeds
balls with a balanced k-way partition (k = floor(sqrt(N)) by default),
then recursively splits each ball in two between its two highest-degree
nodes whenever the split improves the configured quality measure.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import Graph, _induced_csr
from .partition import partition_k

__all__ = [
    "ADAPTIVE_AD", "PURITY_THRESHOLD", "PURITY_AND_AD", "MODES",
    "Ball", "BallPartition", "CoarsenConfig", "SplitRecord", "CoarsenResult",
    "make_ball", "ball_quality", "ball_purity", "pick_split_centers",
    "dual_bfs_split", "adaptive_should_split", "split_ball_recursive",
    "coarsen", "save_ball_partition", "load_ball_partition",
]

ADAPTIVE_AD = "adaptive-ad"
PURITY_THRESHOLD = "purity"
PURITY_AND_AD = "purity-ad"
MODES = (ADAPTIVE_AD, PURITY_THRESHOLD, PURITY_AND_AD)


@dataclass(frozen=True)
class Ball:
    """Sorted node set with its induced edge count."""

    nodes: np.ndarray
    internal_edges: int

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def quality(self) -> float:
        """Average degree: induced edge count over node count."""
        return self.internal_edges / len(self.nodes)


@dataclass
class BallPartition:
    """Disjoint cover of the node set by balls; ball_of maps node -> ball index."""

    balls: list[Ball]
    ball_of: np.ndarray

    @property
    def t(self) -> int:
        return len(self.balls)

    def sizes(self) -> np.ndarray:
        return np.asarray([b.size for b in self.balls], dtype=np.int64)

    def validate(self, g: Graph) -> None:
        if len(self.ball_of) != g.num_nodes:
            raise ValueError("ball_of length mismatch")
        seen = np.zeros(g.num_nodes, dtype=bool)
        for i, b in enumerate(self.balls):
            if b.size == 0:
                raise ValueError(f"ball {i} empty")
            if np.any(np.diff(b.nodes) <= 0):
                raise ValueError(f"ball {i} nodes not sorted/distinct")
            if np.any(seen[b.nodes]):
                raise ValueError(f"ball {i} overlaps a previous ball")
            seen[b.nodes] = True
            if np.any(self.ball_of[b.nodes] != i):
                raise ValueError(f"ball_of inconsistent with ball {i}")
            recount = _internal_edge_count(g, b.nodes)
            if recount != b.internal_edges:
                raise ValueError(
                    f"ball {i}: cached {b.internal_edges} internal edges, recount {recount}")
        if not seen.all():
            raise ValueError("balls do not cover the node set")


@dataclass
class CoarsenConfig:
    """Knobs for the coarsening pipeline.

    ``initial_k=None`` means floor(sqrt(N)). ``skip_init`` drops the
    k-way initialization (one root ball); ``skip_split`` drops the
    binary-splitting stage. ``purity_threshold`` is active in the purity
    modes only.
    """

    mode: str = ADAPTIVE_AD
    initial_k: int | None = None
    purity_threshold: float = 1.0
    skip_init: bool = False
    skip_split: bool = False
    epsilon: float = 0.1
    seed: int = 0
    global_degree_centers: bool = False
    purity_all_labels: bool = False
    num_tries: int = 8
    max_fm_passes: int = 10
    coarsen_stop: int | None = None  # None: max(40, 4k) inside the partitioner

    def validate(self, g: Graph | None = None) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0.0 < self.purity_threshold <= 1.0:
            raise ValueError("purity_threshold must lie in (0, 1]")
        if self.initial_k is not None:
            if self.initial_k < 1:
                raise ValueError("initial_k must be positive")
            if g is not None and self.initial_k > g.num_nodes:
                raise ValueError("initial_k exceeds node count")

    def resolved_k(self, g: Graph) -> int:
        if self.initial_k is not None:
            return self.initial_k
        return max(1, math.isqrt(g.num_nodes))


@dataclass(frozen=True)
class SplitRecord:
    """One trial split: parent/child qualities and the verdict."""

    parent_size: int
    parent_quality: float
    quality_a: float
    quality_b: float
    accepted: bool


@dataclass
class CoarsenResult:
    partition: BallPartition
    init_ms: float
    split_ms: float
    trace: list[SplitRecord] = field(default_factory=list)

    @property
    def total_ms(self) -> float:
        return self.init_ms + self.split_ms


def _internal_edge_count(g: Graph, nodes: np.ndarray) -> int:
    _, cols = _induced_csr(g, nodes)
    return len(cols) // 2


def make_ball(g: Graph, nodes) -> Ball:
    """Ball over ``nodes`` with its induced edge count computed."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    if len(nodes) == 0:
        raise ValueError("ball must be nonempty")
    if np.any(np.diff(nodes) == 0):
        raise ValueError("duplicate node in ball")
    if nodes[0] < 0 or nodes[-1] >= g.num_nodes:
        raise ValueError("ball node id out of range")
    return Ball(nodes=nodes, internal_edges=_internal_edge_count(g, nodes))


def ball_quality(g: Graph, nodes) -> float:
    """Induced edge count divided by node count (average degree)."""
    nodes = np.asarray(nodes, dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("quality of an empty node set is undefined")
    return _internal_edge_count(g, np.sort(nodes)) / len(nodes)


def ball_purity(ball: Ball | np.ndarray, labels: np.ndarray,
                eligible: np.ndarray | None = None,
                count_all: bool = False) -> float:
    """Share of the most frequent label among the counted nodes.

    With an ``eligible`` role mask, only TRAIN (role 0) nodes count, to
    keep evaluation labels out of the coarsening; a ball without any
    counted node reports 1.0 (unsplittable by purity). ``count_all``
    restores counting over every node.
    """
    nodes = ball.nodes if isinstance(ball, Ball) else np.asarray(ball, dtype=np.int64)
    if len(nodes) == 0:
        raise ValueError("purity of an empty ball is undefined")
    labels = np.asarray(labels)
    counted = nodes
    if eligible is not None and not count_all:
        counted = nodes[np.asarray(eligible)[nodes] == 0]
        if len(counted) == 0:
            return 1.0
    counts = np.bincount(labels[counted])
    return int(counts.max()) / len(counted)


def pick_split_centers(g: Graph, ball: Ball,
                       global_degree: bool = False) -> tuple[int, int]:
    """Two distinct highest-degree nodes of the ball (ties: smallest id).

    Degree is measured inside the ball's induced subgraph unless
    ``global_degree`` asks for whole-graph degrees.
    """
    if ball.size < 2:
        raise ValueError("cannot pick split centers of a singleton ball")
    if global_degree:
        deg = g.degrees()[ball.nodes]
    else:
        loff, _ = _induced_csr(g, ball.nodes)
        deg = np.diff(loff)
    ia = int(np.argmax(deg))
    masked = deg.copy()
    masked[ia] = -1
    ib = int(np.argmax(masked))
    return int(ball.nodes[ia]), int(ball.nodes[ib])


def _local_index(nodes: np.ndarray, v: int) -> int:
    i = int(np.searchsorted(nodes, v))
    if i >= len(nodes) or nodes[i] != v:
        raise ValueError(f"center {v} not in ball")
    return i


def _children_from_labels(nodes: np.ndarray, loff: np.ndarray,
                          lcols: np.ndarray, lab: np.ndarray) -> tuple[Ball, Ball]:
    rows = np.repeat(np.arange(len(nodes), dtype=np.int64), np.diff(loff))
    same = lab[rows] == lab[lcols]
    ea = int((same & (lab[rows] == 0)).sum()) // 2
    eb = int((same & (lab[rows] == 1)).sum()) // 2
    return (Ball(nodes=nodes[lab == 0], internal_edges=ea),
            Ball(nodes=nodes[lab == 1], internal_edges=eb))


def dual_bfs_split(g: Graph, ball: Ball, v_a: int, v_b: int) -> tuple[Ball, Ball]:
    """Split a ball between two centers by synchronized two-source BFS.

    BFS runs inside the ball's induced subgraph; ties at equal hop
    distance and nodes unreachable from both centers go to child A. Both
    children are nonempty (each keeps its center).
    """
    if v_a == v_b:
        raise ValueError("split centers must be distinct")
    nodes = ball.nodes
    ia = _local_index(nodes, v_a)
    ib = _local_index(nodes, v_b)
    loff, lcols = _induced_csr(g, nodes)
    lab = _kernels.dual_bfs(loff, lcols, ia, ib)
    return _children_from_labels(nodes, loff, lcols, lab)


def adaptive_should_split(q_parent: float, q_a: float, q_b: float) -> bool:
    """Accept a split iff the mean child quality strictly beats the parent."""
    return (q_a + q_b) / 2.0 > q_parent


def _trial_split(g: Graph, ball: Ball, global_degree: bool) -> tuple[Ball, Ball]:
    """Centers + dual BFS in one pass over the ball's induced CSR."""
    nodes = ball.nodes
    loff, lcols = _induced_csr(g, nodes)
    if global_degree:
        deg = g.degrees()[nodes]
    else:
        deg = np.diff(loff)
    ia = int(np.argmax(deg))
    masked = deg.copy()
    masked[ia] = -1
    ib = int(np.argmax(masked))
    lab = _kernels.dual_bfs(loff, lcols, ia, ib)
    return _children_from_labels(nodes, loff, lcols, lab)


def split_ball_recursive(g: Graph, ball: Ball, cfg: CoarsenConfig,
                         labels: np.ndarray | None = None,
                         mask: np.ndarray | None = None,
                         trace: list[SplitRecord] | None = None) -> list[Ball]:
    """Work-queue binary splitting of one ball down to its final pieces.

    Acceptance per mode: adaptive-ad accepts when the mean child average
    degree strictly beats the parent; purity splits while the ball's
    purity is below the threshold; purity-ad requires both. Each
    accepted split strictly shrinks ball sizes, so this terminates.
    """
    purity_mode = cfg.mode in (PURITY_THRESHOLD, PURITY_AND_AD)
    if purity_mode and labels is None:
        raise ValueError(f"mode {cfg.mode!r} needs labels")
    out: list[Ball] = []
    queue: deque[Ball] = deque([ball])
    while queue:
        b = queue.popleft()
        if b.size < 2:
            out.append(b)
            continue
        if purity_mode:
            purity = ball_purity(b, labels, mask, cfg.purity_all_labels)
            if purity >= cfg.purity_threshold:
                out.append(b)
                continue
        child_a, child_b = _trial_split(g, b, cfg.global_degree_centers)
        if cfg.mode == PURITY_THRESHOLD:
            accepted = True
        else:
            accepted = adaptive_should_split(b.quality, child_a.quality, child_b.quality)
        if trace is not None:
            trace.append(SplitRecord(parent_size=b.size, parent_quality=b.quality,
                                     quality_a=child_a.quality,
                                     quality_b=child_b.quality, accepted=accepted))
        if accepted:
            queue.append(child_a)
            queue.append(child_b)
        else:
            out.append(b)
    return out


def coarsen(g: Graph, cfg: CoarsenConfig,
            labels: np.ndarray | None = None,
            mask: np.ndarray | None = None) -> CoarsenResult:
    """Run the full coarsening pipeline on ``g``.

    Stage 1 partitions the node set into balanced initial balls (skipped
    by ``skip_init``, leaving one root ball); stage 2 splits each initial
    ball recursively (skipped by ``skip_split``). Deterministic for a
    fixed config.
    """
    cfg.validate(g)
    if labels is not None and hasattr(labels, "labels"):
        labels = labels.labels

    t0 = time.perf_counter()
    if cfg.skip_init:
        initial = [make_ball(g, np.arange(g.num_nodes, dtype=np.int64))]
    else:
        k = cfg.resolved_k(g)
        asg = partition_k(g, k, cfg.epsilon, rng=np.random.default_rng(cfg.seed),
                          num_tries=cfg.num_tries, max_fm_passes=cfg.max_fm_passes,
                          coarsen_stop=cfg.coarsen_stop)
        order = np.argsort(asg.part_of, kind="stable")
        bounds = np.searchsorted(asg.part_of[order], np.arange(k + 1))
        initial = [make_ball(g, order[bounds[i]:bounds[i + 1]]) for i in range(k)]
    init_ms = (time.perf_counter() - t0) * 1000.0

    t1 = time.perf_counter()
    trace: list[SplitRecord] = []
    if cfg.skip_split:
        finals = initial
    else:
        finals = []
        for b in initial:
            finals.extend(split_ball_recursive(g, b, cfg, labels, mask, trace))
    split_ms = (time.perf_counter() - t1) * 1000.0

    ball_of = np.empty(g.num_nodes, dtype=np.int64)
    for i, b in enumerate(finals):
        ball_of[b.nodes] = i
    return CoarsenResult(partition=BallPartition(balls=finals, ball_of=ball_of),
                         init_ms=init_ms, split_ms=split_ms, trace=trace)


def save_ball_partition(path, p: BallPartition) -> None:
    """One ball id per line."""
    Path(path).write_text("\n".join(str(int(i)) for i in p.ball_of) + "\n",
                          encoding="utf-8")


def load_ball_partition(path, g: Graph) -> BallPartition:
    """Rebuild a BallPartition from a ball-id-per-line file."""
    vals = [int(line) for line in Path(path).read_text(encoding="utf-8").split()]
    ball_of = np.asarray(vals, dtype=np.int64)
    if len(ball_of) != g.num_nodes:
        raise ValueError(f"{path}: {len(ball_of)} assignments for {g.num_nodes} nodes")
    if ball_of.min() < 0:
        raise ValueError(f"{path}: negative ball id")
    t = int(ball_of.max()) + 1
    sizes = np.bincount(ball_of, minlength=t)
    if np.any(sizes == 0):
        raise ValueError(f"{path}: ball ids not contiguous")
    order = np.argsort(ball_of, kind="stable")
    bounds = np.searchsorted(ball_of[order], np.arange(t + 1))
    balls = [make_ball(g, order[bounds[i]:bounds[i + 1]]) for i in range(t)]
    return BallPartition(balls=balls, ball_of=ball_of)
