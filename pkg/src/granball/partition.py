"""Multilevel k-way graph partitioner.

Recursive bisection in the classic multilevel style: heavy-edge matching
coarsens the graph to a few dozen nodes, a greedy graph-growing heuristic
bisects the coarsest level, and boundary FM refinement runs while the
assignment is projected back up. Parts are balanced to
ceil(N/k) + ceil(epsilon*N/k) nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import Graph, _induced_csr

__all__ = [
    "Matching", "WeightedGraph", "PartitionAssignment",
    "heavy_edge_matching", "contract", "initial_bisection", "fm_refine",
    "partition_k", "cut_edges_of", "save_assignment",
]


@dataclass(frozen=True)
class Matching:
    """Symmetric matching: mate_of[v] is a neighbor of v, or v itself."""

    mate_of: np.ndarray

    def validate(self, g) -> None:
        mate = self.mate_of
        if np.any(mate[mate] != np.arange(len(mate))):
            raise ValueError("matching not symmetric")
        for v in range(len(mate)):
            m = int(mate[v])
            if m != v and m not in set(g.neighbors_of(v).tolist()):
                raise ValueError(f"mate of {v} is not a neighbor")


@dataclass(frozen=True)
class WeightedGraph:
    """CSR graph with integer node and edge weights (contraction levels)."""

    offsets: np.ndarray
    neighbors: np.ndarray
    edge_weights: np.ndarray
    node_weights: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.offsets) - 1

    @property
    def total_node_weight(self) -> int:
        return int(self.node_weights.sum())

    @property
    def total_edge_weight(self) -> int:
        """Sum of weights over undirected edges."""
        return int(self.edge_weights.sum()) // 2

    @classmethod
    def from_graph(cls, g: Graph) -> "WeightedGraph":
        return cls(offsets=g.offsets, neighbors=g.neighbors,
                   edge_weights=np.ones(len(g.neighbors), dtype=np.int64),
                   node_weights=np.ones(g.num_nodes, dtype=np.int64))

    def edge_sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_nodes, dtype=np.int64),
                         np.diff(self.offsets))


@dataclass
class PartitionAssignment:
    """Node -> part map with the cut size. Parts cover the nodes disjointly."""

    part_of: np.ndarray
    k: int
    cut_edges: int

    def part_sizes(self) -> np.ndarray:
        return np.bincount(self.part_of, minlength=self.k)

    def validate(self, g: Graph, epsilon: float) -> None:
        if len(self.part_of) != g.num_nodes:
            raise ValueError("assignment length mismatch")
        if self.part_of.min() < 0 or self.part_of.max() >= self.k:
            raise ValueError("part id out of range")
        sizes = self.part_sizes()
        if np.any(sizes == 0):
            raise ValueError(f"empty part {int(np.argmin(sizes))}")
        cap = math.ceil(g.num_nodes / self.k) + math.ceil(epsilon * g.num_nodes / self.k)
        if sizes.max() > cap:
            raise ValueError(f"part size {int(sizes.max())} exceeds balance cap {cap}")
        if self.cut_edges != cut_edges_of(g, self.part_of):
            raise ValueError("cut_edges does not match recount")


def cut_edges_of(g: Graph, part_of: np.ndarray) -> int:
    """Number of edges whose endpoints lie in different parts."""
    diff = part_of[g.edge_sources] != part_of[g.neighbors]
    return int(diff.sum()) // 2


def heavy_edge_matching(g, rng: np.random.Generator | None = None,
                        order: np.ndarray | None = None,
                        wmax: int | None = None) -> Matching:
    """Maximal matching: greedy heaviest-edge, random visit order.

    ``order`` overrides the random permutation (hand traces in tests);
    ``wmax`` refuses pairs whose combined node weight would exceed it.
    """
    wg = g if isinstance(g, WeightedGraph) else WeightedGraph.from_graph(g)
    if order is None:
        if rng is None:
            raise ValueError("need an rng or an explicit visit order")
        order = rng.permutation(wg.num_nodes)
    order = np.asarray(order, dtype=np.int64)
    if wmax is None:
        wmax = int(wg.node_weights.sum())
    mate = _kernels.match_heavy(wg.offsets, wg.neighbors, wg.edge_weights,
                                wg.node_weights, order, wmax)
    return Matching(mate_of=mate)


def contract(wg: WeightedGraph, m: Matching) -> tuple[WeightedGraph, np.ndarray]:
    """Collapse matched pairs into coarse nodes.

    Node weights add; parallel coarse edges merge with summed weights;
    self-edges are dropped. Returns the coarse graph and the old->coarse
    id map (coarse ids ordered by each group's smallest member).
    """
    n = wg.num_nodes
    reps = np.minimum(np.arange(n, dtype=np.int64), m.mate_of)
    uniq, cmap = np.unique(reps, return_inverse=True)
    nc = len(uniq)
    node_w = np.zeros(nc, dtype=np.int64)
    np.add.at(node_w, cmap, wg.node_weights)
    rows = cmap[wg.edge_sources()]
    cols = cmap[wg.neighbors]
    keep = rows != cols
    if keep.any():
        key = rows[keep] * np.int64(nc) + cols[keep]
        uk, inv = np.unique(key, return_inverse=True)
        ew = np.zeros(len(uk), dtype=np.int64)
        np.add.at(ew, inv, wg.edge_weights[keep])
        new_rows = uk // nc
        new_cols = uk % nc
    else:
        new_rows = new_cols = ew = np.empty(0, dtype=np.int64)
    offsets = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(new_rows, minlength=nc), out=offsets[1:])
    coarse = WeightedGraph(offsets=offsets, neighbors=new_cols,
                           edge_weights=ew, node_weights=node_w)
    return coarse, cmap


def initial_bisection(wg: WeightedGraph, target_weights: tuple[int, int],
                      rng: np.random.Generator, num_tries: int = 8,
                      max_weights: tuple[int, int] | None = None,
                      min_weights: tuple[int, int] = (1, 1)) -> PartitionAssignment:
    """Greedy graph-growing bisection of a (small) coarsest graph.

    Grows the left part from a random seed, absorbing the boundary node
    with the best internal-minus-external gain until the left target
    weight is reached; best of ``num_tries`` seeds by cut weight wins.
    """
    w_left, w_right = int(target_weights[0]), int(target_weights[1])
    total = wg.total_node_weight
    if w_left + w_right > total:
        raise ValueError(f"target weights {w_left}+{w_right} exceed total {total}")
    if max_weights is None:
        max_weights = (total, total)
    cap_l, cap_r = int(max_weights[0]), int(max_weights[1])
    min_l, min_r = int(min_weights[0]), int(min_weights[1])
    # reaching this target also brings the right side under its cap
    target = max(w_left, total - cap_r)
    best_side = None
    best_cut = None
    for _ in range(max(1, num_tries)):
        seed = int(rng.integers(wg.num_nodes))
        side, cut = _kernels.greedy_grow(wg.offsets, wg.neighbors, wg.edge_weights,
                                         wg.node_weights, seed, target, cap_l, min_r)
        if best_cut is None or cut < best_cut:
            best_side, best_cut = side, int(cut)
    return PartitionAssignment(part_of=best_side.astype(np.int64), k=2,
                               cut_edges=best_cut)


def _fm_side(wg: WeightedGraph, side: np.ndarray,
             max_weights: tuple[int, int], min_weights: tuple[int, int],
             max_fm_passes: int) -> tuple[np.ndarray, int]:
    cap_l, cap_r = int(max_weights[0]), int(max_weights[1])
    if cap_l + cap_r < wg.total_node_weight:
        raise ValueError("infeasible caps: smaller than total node weight")
    side8 = side.astype(np.int8)
    # 64 consecutive non-improving moves end a pass (boundary FM practice)
    cut = int(_kernels.fm_refine_passes(wg.offsets, wg.neighbors, wg.edge_weights,
                                        wg.node_weights, side8, cap_l, cap_r,
                                        int(min_weights[0]), int(min_weights[1]),
                                        max(1, max_fm_passes), 64))
    return side8, cut


def fm_refine(wg: WeightedGraph, asg: PartitionAssignment,
              max_weights: tuple[int, int],
              min_weights: tuple[int, int] = (1, 1),
              max_fm_passes: int = 10) -> PartitionAssignment:
    """Boundary FM refinement of a 2-way assignment.

    Each pass tentatively moves boundary nodes at most once each in
    descending gain order (gain = external - internal edge weight),
    respecting the weight caps, then rolls back to the minimum-cut
    prefix. Stops when a pass brings no improvement. The cut never
    increases and the caps are never violated on return.
    """
    side, cut = _fm_side(wg, asg.part_of, max_weights, min_weights, max_fm_passes)
    return PartitionAssignment(part_of=side.astype(np.int64), k=2, cut_edges=cut)


def _force_balance(wg: WeightedGraph, side: np.ndarray,
                   caps: tuple[int, int], floors: tuple[int, int]) -> np.ndarray:
    """Move nodes (cheapest cut damage first) until caps/floors hold.

    Used at the unit-weight level where any single move shifts exactly
    one unit, so feasible bounds are always reachable.
    """
    n = wg.num_nodes
    w0 = int(wg.node_weights[side == 0].sum())
    total = wg.total_node_weight
    lower0 = max(floors[0], total - caps[1])
    upper0 = min(caps[0], total - floors[1])
    if lower0 <= w0 <= upper0:
        return side
    src = wg.edge_sources()
    same = side[src] == side[wg.neighbors]
    gain = np.zeros(n, dtype=np.int64)  # external - internal per node
    np.add.at(gain, src, np.where(same, -wg.edge_weights, wg.edge_weights))
    side = side.copy()
    from_side = 0 if w0 > upper0 else 1
    deficit = w0 - upper0 if w0 > upper0 else lower0 - w0
    movable = np.where(side == from_side)[0]
    order = movable[np.lexsort((movable, -gain[movable]))]
    moved = 0
    for v in order:
        if moved >= deficit:
            break
        side[v] = 1 - from_side
        moved += int(wg.node_weights[v])
    return side


def _bisect_side(sub: Graph, k: int, k_left: int, k_right: int, part_max: int,
                 rng: np.random.Generator, num_tries: int,
                 max_fm_passes: int, coarsen_stop: int | None) -> np.ndarray:
    """Multilevel 2-way split of ``sub``; returns a 0/1 side per node."""
    n = sub.num_nodes
    caps = (k_left * part_max, k_right * part_max)
    floors = (k_left, k_right)
    stop = coarsen_stop if coarsen_stop is not None else max(40, 4 * k)
    wmax = max(2, (3 * n) // (2 * stop))

    levels = [WeightedGraph.from_graph(sub)]
    cmaps = []
    while levels[-1].num_nodes > stop:
        m = heavy_edge_matching(levels[-1], rng, wmax=wmax)
        coarse, cmap = contract(levels[-1], m)
        if coarse.num_nodes >= 0.98 * levels[-1].num_nodes:
            break
        levels.append(coarse)
        cmaps.append(cmap)

    target_l = -(-n * k_left // k)  # ceil
    asg = initial_bisection(levels[-1], (target_l, n - target_l), rng,
                            num_tries=num_tries, max_weights=caps,
                            min_weights=floors)
    side, _ = _fm_side(levels[-1], asg.part_of, caps, floors, max_fm_passes)
    for lev in range(len(cmaps) - 1, -1, -1):
        side = side[cmaps[lev]]
        side, _ = _fm_side(levels[lev], side, caps, floors, max_fm_passes)
    # coarse-node granularity can strand the caps; repair at unit weights
    repaired = _force_balance(levels[0], side, caps, floors)
    if repaired is not side:
        side, _ = _fm_side(levels[0], repaired, caps, floors, max_fm_passes)
    return side


def partition_k(g: Graph, k: int, epsilon: float = 0.1,
                rng: np.random.Generator | int | None = None, *,
                num_tries: int = 8, max_fm_passes: int = 10,
                coarsen_stop: int | None = None) -> PartitionAssignment:
    """Partition ``g`` into ``k`` balanced parts minimizing cut edges.

    Recursive multilevel bisection; odd ``k`` splits into
    (ceil(k/2), floor(k/2)) sub-problems. Every part holds at most
    ceil(N/k) + ceil(epsilon*N/k) nodes. Deterministic for a fixed rng
    seed.
    """
    n = g.num_nodes
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds node count {n}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    part_max = math.ceil(n / k) + math.ceil(epsilon * n / k)
    part_of = np.empty(n, dtype=np.int64)

    def recurse(sub: Graph, ids: np.ndarray, kk: int, base: int) -> None:
        if kk == 1:
            part_of[ids] = base
            return
        if kk == len(ids):
            part_of[ids] = base + np.arange(kk, dtype=np.int64)
            return
        k_l = (kk + 1) // 2
        k_r = kk // 2
        side = _bisect_side(sub, kk, k_l, k_r, part_max, rng,
                            num_tries, max_fm_passes, coarsen_stop)
        left = np.where(side == 0)[0]
        right = np.where(side == 1)[0]
        if len(left) < k_l or len(right) < k_r:
            raise RuntimeError("bisection failed to meet part-count floors")
        for local, sub_k, sub_base in ((left, k_l, base), (right, k_r, base + k_l)):
            if sub_k == 1:
                part_of[ids[local]] = sub_base
                continue
            off, cols = _induced_csr(sub, local)
            recurse(Graph(offsets=off, neighbors=cols), ids[local], sub_k, sub_base)

    recurse(g, np.arange(n, dtype=np.int64), k, 0)
    return PartitionAssignment(part_of=part_of, k=k, cut_edges=cut_edges_of(g, part_of))


def save_assignment(path, asg: PartitionAssignment, epsilon: float,
                    seed, wall_time_ms: float) -> None:
    """Write one part id per line plus a JSON sidecar with summary stats."""
    path = Path(path)
    path.write_text("\n".join(str(int(p)) for p in asg.part_of) + "\n", encoding="utf-8")
    sidecar = {
        "k": asg.k,
        "cut_edges": asg.cut_edges,
        "part_sizes": [int(s) for s in asg.part_sizes()],
        "epsilon": epsilon,
        "seed": seed,
        "wall_time_ms": wall_time_ms,
    }
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
