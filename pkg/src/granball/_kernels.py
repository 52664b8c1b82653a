"""Compiled inner loops for partitioning and ball splitting.

Everything here operates on plain int64 CSR arrays so the callers keep
their numpy-facing surface. Set NUMBA_DISABLE_JIT=1 to run these as
ordinary Python for debugging.
"""

from __future__ import annotations

import numpy as np
from numba import njit

__all__ = ["match_heavy", "greedy_grow", "fm_refine_passes", "dual_bfs", "warmup"]


@njit(cache=True)
def match_heavy(offsets, neighbors, eweights, nweights, order, wmax):
    """Greedy maximal matching visiting nodes in ``order``.

    Each unmatched node pairs with its unmatched neighbor of maximum
    edge weight (ties: smallest id), else matches itself. Pairs whose
    combined node weight exceeds ``wmax`` are not formed, which keeps
    contracted nodes small enough for balanced bisection.
    """
    n = offsets.shape[0] - 1
    mate = np.full(n, -1, dtype=np.int64)
    for idx in range(n):
        v = order[idx]
        if mate[v] >= 0:
            continue
        best = np.int64(-1)
        best_w = np.int64(0)
        for e in range(offsets[v], offsets[v + 1]):
            u = neighbors[e]
            if u == v or mate[u] >= 0:
                continue
            if nweights[v] + nweights[u] > wmax:
                continue
            w = eweights[e]
            if w > best_w or (w == best_w and (best < 0 or u < best)):
                best = u
                best_w = w
        if best >= 0:
            mate[v] = best
            mate[best] = v
        else:
            mate[v] = v
    return mate


@njit(cache=True, inline="always")
def _heap_push(h1, h2, size, k1, k2):
    """Min-heap on (k1, k2) pairs; grows the backing arrays on demand."""
    cap = h1.shape[0]
    if size >= cap:
        g1 = np.empty(cap * 2, dtype=np.int64)
        g2 = np.empty(cap * 2, dtype=np.int64)
        g1[:cap] = h1
        g2[:cap] = h2
        h1, h2 = g1, g2
    h1[size] = k1
    h2[size] = k2
    i = size
    while i > 0:
        p = (i - 1) >> 1
        if h1[p] > h1[i] or (h1[p] == h1[i] and h2[p] > h2[i]):
            h1[p], h1[i] = h1[i], h1[p]
            h2[p], h2[i] = h2[i], h2[p]
            i = p
        else:
            break
    return h1, h2, size + 1


@njit(cache=True, inline="always")
def _heap_pop(h1, h2, size):
    k1 = h1[0]
    k2 = h2[0]
    size -= 1
    h1[0] = h1[size]
    h2[0] = h2[size]
    i = 0
    while True:
        l = 2 * i + 1
        r = l + 1
        best = i
        if l < size and (h1[l] < h1[best] or (h1[l] == h1[best] and h2[l] < h2[best])):
            best = l
        if r < size and (h1[r] < h1[best] or (h1[r] == h1[best] and h2[r] < h2[best])):
            best = r
        if best == i:
            break
        h1[best], h1[i] = h1[i], h1[best]
        h2[best], h2[i] = h2[i], h2[best]
        i = best
    return k1, k2, size


@njit(cache=True)
def greedy_grow(offsets, neighbors, eweights, nweights, seed, target_w,
                cap_left, min_right):
    """Grow a left part from ``seed`` by repeatedly absorbing the boundary
    node with the largest internal-minus-external gain.

    Growth stops once the left weight reaches ``target_w``. Absorptions
    never push the left weight above ``cap_left`` nor the right weight
    below ``min_right``; when the boundary empties the lowest-id
    unassigned node is absorbed instead. Returns (side, cut_weight)
    where side[v] == 0 marks the left part.
    """
    n = offsets.shape[0] - 1
    side = np.ones(n, dtype=np.int8)
    # gain = 2 * (weight to left) - weighted degree == internal - external
    gain = np.empty(n, dtype=np.int64)
    total_w = np.int64(0)
    for v in range(n):
        total_w += nweights[v]
        d = np.int64(0)
        for e in range(offsets[v], offsets[v + 1]):
            d += eweights[e]
        gain[v] = -d
    hard_cap = total_w - min_right
    if cap_left < hard_cap:
        hard_cap = cap_left

    h1 = np.empty(2 * n + 16, dtype=np.int64)
    h2 = np.empty(2 * n + 16, dtype=np.int64)
    hs = 0
    skipped = np.empty(n, dtype=np.int64)
    inskip = np.zeros(n, dtype=np.uint8)
    nskip = 0

    side[seed] = 0
    w_left = np.int64(nweights[seed])
    for e in range(offsets[seed], offsets[seed + 1]):
        u = neighbors[e]
        if side[u] == 1:
            gain[u] += 2 * eweights[e]
            h1, h2, hs = _heap_push(h1, h2, hs, -gain[u], u)

    next_jump = 0
    while w_left < target_w:
        v = np.int64(-1)
        while hs > 0:
            negg, cand, hs = _heap_pop(h1, h2, hs)
            if side[cand] == 0 or negg != -gain[cand]:
                continue
            if w_left + nweights[cand] > hard_cap:
                if inskip[cand] == 0:
                    inskip[cand] = 1
                    skipped[nskip] = cand
                    nskip += 1
                continue
            v = cand
            break
        if v < 0:
            # boundary exhausted: jump to the lowest-id unassigned node
            while next_jump < n and side[next_jump] == 0:
                next_jump += 1
            if next_jump >= n:
                break
            if w_left + nweights[next_jump] > hard_cap:
                break
            v = np.int64(next_jump)
        side[v] = 0
        w_left += nweights[v]
        for e in range(offsets[v], offsets[v + 1]):
            u = neighbors[e]
            if side[u] == 1:
                gain[u] += 2 * eweights[e]
                h1, h2, hs = _heap_push(h1, h2, hs, -gain[u], u)
        for i in range(nskip):
            u = skipped[i]
            inskip[u] = 0
            if side[u] == 1:
                h1, h2, hs = _heap_push(h1, h2, hs, -gain[u], u)
        nskip = 0

    cut = np.int64(0)
    for v in range(n):
        for e in range(offsets[v], offsets[v + 1]):
            if side[v] != side[neighbors[e]]:
                cut += eweights[e]
    return side, cut // 2


@njit(cache=True)
def fm_refine_passes(offsets, neighbors, eweights, nweights, side,
                     cap0, cap1, floor0, floor1, max_passes, abort_after):
    """Boundary FM refinement: repeated tentative-move passes with
    rollback to each pass's minimum-cut prefix.

    A pass moves boundary nodes at most once each in descending gain
    order (gain = external - internal edge weight), skips moves that
    would break the weight caps/floors, and stops after ``abort_after``
    consecutive non-improving moves. Gains are maintained incrementally
    across moves, rollbacks, and passes, so each extra pass costs only
    the moves it tries. ``side`` is updated in place; returns its cut.
    """
    n = offsets.shape[0] - 1
    gain = np.empty(n, dtype=np.int64)
    bdry = np.zeros(n, dtype=np.uint8)
    cut2 = np.int64(0)
    w0 = np.int64(0)
    w1 = np.int64(0)
    for v in range(n):
        if side[v] == 0:
            w0 += nweights[v]
        else:
            w1 += nweights[v]
        g = np.int64(0)
        for e in range(offsets[v], offsets[v + 1]):
            w = eweights[e]
            if side[neighbors[e]] == side[v]:
                g -= w
            else:
                g += w
                bdry[v] = 1
                cut2 += w
        gain[v] = g
    best_cut = cut2 // 2

    h1 = np.empty(2 * n + 16, dtype=np.int64)
    h2 = np.empty(2 * n + 16, dtype=np.int64)
    moved = np.zeros(n, dtype=np.uint8)
    move_stack = np.empty(n, dtype=np.int64)
    prefix_cut = np.empty(n, dtype=np.int64)
    # near-random graphs have boundary ~ n and only marginal gains;
    # a per-pass move budget keeps refinement proportional to the level
    move_budget = max(1024, n >> 3)

    for _ in range(max_passes):
        hs = 0
        for v in range(n):
            if bdry[v] == 1:
                h1, h2, hs = _heap_push(h1, h2, hs, -gain[v], v)
        if hs == 0:
            break
        start_cut = best_cut
        cur = start_cut
        m = 0
        since_best = 0
        pass_best = start_cut

        while hs > 0 and since_best <= abort_after and m < move_budget:
            negg, v, hs = _heap_pop(h1, h2, hs)
            if moved[v] == 1 or negg != -gain[v]:
                continue
            s = side[v]
            if s == 0:
                nw0 = w0 - nweights[v]
                nw1 = w1 + nweights[v]
            else:
                nw0 = w0 + nweights[v]
                nw1 = w1 - nweights[v]
            if nw0 > cap0 or nw1 > cap1 or nw0 < floor0 or nw1 < floor1:
                continue  # balance-blocked; the next pass reconsiders it
            moved[v] = 1
            side[v] = 1 - s
            w0, w1 = nw0, nw1
            cur -= gain[v]
            gain[v] = -gain[v]
            move_stack[m] = v
            prefix_cut[m] = cur
            m += 1
            if cur < pass_best:
                pass_best = cur
                since_best = 0
            else:
                since_best += 1
            for e in range(offsets[v], offsets[v + 1]):
                u = neighbors[e]
                w = eweights[e]
                if side[u] == side[v]:
                    gain[u] -= 2 * w
                else:
                    gain[u] += 2 * w
                if moved[u] == 0:
                    h1, h2, hs = _heap_push(h1, h2, hs, -gain[u], u)

        best_i = np.int64(-1)
        best = start_cut
        for i in range(m):
            if prefix_cut[i] < best:
                best = prefix_cut[i]
                best_i = i
        # roll back the suffix, reversing side flips, weights, and gains
        for i in range(m - 1, best_i, -1):
            v = move_stack[i]
            s = side[v]
            side[v] = 1 - s
            if s == 0:
                w0 -= nweights[v]
                w1 += nweights[v]
            else:
                w0 += nweights[v]
                w1 -= nweights[v]
            gain[v] = -gain[v]
            for e in range(offsets[v], offsets[v + 1]):
                u = neighbors[e]
                w = eweights[e]
                if side[u] == side[v]:
                    gain[u] -= 2 * w
                else:
                    gain[u] += 2 * w
        # refresh boundary flags around everything this pass touched
        for i in range(m):
            v = move_stack[i]
            moved[v] = 0
            bdry[v] = _is_boundary(offsets, neighbors, side, v)
            for e in range(offsets[v], offsets[v + 1]):
                u = neighbors[e]
                bdry[u] = _is_boundary(offsets, neighbors, side, u)
        if best >= start_cut:
            break
        best_cut = best
        # diminishing returns: stop once a pass recovers under ~0.2%
        if start_cut - best < max(1, start_cut >> 9):
            break
    return best_cut


@njit(cache=True, inline="always")
def _is_boundary(offsets, neighbors, side, v):
    for e in range(offsets[v], offsets[v + 1]):
        if side[neighbors[e]] != side[v]:
            return np.uint8(1)
    return np.uint8(0)


@njit(cache=True)
def dual_bfs(offsets, neighbors, a, b):
    """Two-source synchronized BFS on a local CSR.

    Frontier A expands first at every depth, so a node claimed at equal
    distance goes to A; nodes unreachable from both sources also go to
    A. Returns a 0/1 label per node (0 = A).
    """
    n = offsets.shape[0] - 1
    label = np.full(n, -1, dtype=np.int8)
    label[a] = 0
    label[b] = 1
    qa = np.empty(n, dtype=np.int64)
    qb = np.empty(n, dtype=np.int64)
    na = 1
    nb = 1
    qa[0] = a
    qb[0] = b
    ta = np.empty(n, dtype=np.int64)
    tb = np.empty(n, dtype=np.int64)
    while na > 0 or nb > 0:
        nta = 0
        for i in range(na):
            v = qa[i]
            for e in range(offsets[v], offsets[v + 1]):
                u = neighbors[e]
                if label[u] < 0:
                    label[u] = 0
                    ta[nta] = u
                    nta += 1
        ntb = 0
        for i in range(nb):
            v = qb[i]
            for e in range(offsets[v], offsets[v + 1]):
                u = neighbors[e]
                if label[u] < 0:
                    label[u] = 1
                    tb[ntb] = u
                    ntb += 1
        qa, ta = ta, qa
        qb, tb = tb, qb
        na = nta
        nb = ntb
    for v in range(n):
        if label[v] < 0:
            label[v] = 0
    return label


def warmup() -> None:
    """Force-compile every kernel on tiny inputs (call before timing)."""
    off = np.array([0, 1, 2], dtype=np.int64)
    nbr = np.array([1, 0], dtype=np.int64)
    ew = np.array([1, 1], dtype=np.int64)
    nw = np.array([1, 1], dtype=np.int64)
    order = np.array([0, 1], dtype=np.int64)
    match_heavy(off, nbr, ew, nw, order, 2)
    greedy_grow(off, nbr, ew, nw, 0, 1, 2, 0)
    fm_refine_passes(off, nbr, ew, nw, np.array([0, 1], dtype=np.int8),
                     2, 2, 0, 0, 2, 64)
    dual_bfs(off, nbr, 0, 1)
