from collections import deque

import numpy as np
import pytest

from granball.balls import (
    ADAPTIVE_AD, PURITY_THRESHOLD, PURITY_AND_AD,
    Ball, BallPartition, CoarsenConfig,
    make_ball, ball_quality, ball_purity, pick_split_centers,
    dual_bfs_split, adaptive_should_split, split_ball_recursive,
    coarsen, save_ball_partition, load_ball_partition,
)
from granball.graph import Graph
from granball.synth import er_graph, sbm_graph

# -- quality / purity ---------------------------------------------------

def test_quality_examples(triangle, path4, star6):
    assert ball_quality(triangle, [0, 1, 2]) == 1.0
    assert ball_quality(path4, [0, 1, 2, 3]) == 0.75
    assert ball_quality(star6, range(6)) == pytest.approx(5 / 6)


def test_quality_empty_rejected(triangle):
    with pytest.raises(ValueError):
        ball_quality(triangle, [])


def test_ball_caches_exact_quality(two_triangles_bridge):
    b = make_ball(two_triangles_bridge, range(6))
    assert b.internal_edges == 7
    assert b.quality == 7 / 6


def test_purity_examples():
    assert ball_purity(np.arange(3), np.array([0, 0, 0])) == 1.0
    assert ball_purity(np.arange(4), np.array([0, 0, 1, 1])) == 0.5
    # direct count: max class multiplicity 3 of 6
    assert ball_purity(np.arange(6), np.array([0, 0, 1, 2, 2, 2])) == 0.5


def test_purity_train_only_counting():
    labels = np.array([0, 0, 1, 1])
    roles = np.array([0, 0, 2, 2], dtype=np.int8)  # only first two are TRAIN
    assert ball_purity(np.arange(4), labels, eligible=roles) == 1.0
    assert ball_purity(np.arange(4), labels, eligible=roles, count_all=True) == 0.5
    # no TRAIN node in the ball -> 1.0 by convention
    assert ball_purity(np.array([2, 3]), labels, eligible=roles) == 1.0


# -- split centers ------------------------------------------------------

def test_centers_path4(path4):
    # internal degrees (1,2,2,1): tie between 1 and 2 broken by id
    assert pick_split_centers(path4, make_ball(path4, range(4))) == (1, 2)


def test_centers_star(star6):
    assert pick_split_centers(star6, make_ball(star6, range(6))) == (0, 1)


def test_centers_isolated_pair():
    g = Graph.from_edges(10, [(0, 1)])
    assert pick_split_centers(g, make_ball(g, [7, 9])) == (7, 9)


def test_centers_singleton_rejected(triangle):
    with pytest.raises(ValueError):
        pick_split_centers(triangle, make_ball(triangle, [1]))


def test_centers_internal_vs_global_degree():
    # node 0 has global degree 3 but degree 0 inside the ball {0, 2, 3}
    g = Graph.from_edges(6, [(0, 1), (0, 4), (0, 5), (2, 3)])
    ball = make_ball(g, [0, 2, 3])
    assert pick_split_centers(g, ball) == (2, 3)
    assert pick_split_centers(g, ball, global_degree=True) == (0, 2)


# -- dual BFS split -----------------------------------------------------

def test_dual_bfs_path4(path4):
    a, b = dual_bfs_split(path4, make_ball(path4, range(4)), 1, 2)
    assert a.nodes.tolist() == [0, 1] and b.nodes.tolist() == [2, 3]


def test_dual_bfs_tie_goes_to_a(triangle):
    a, b = dual_bfs_split(triangle, make_ball(triangle, range(3)), 0, 1)
    assert a.nodes.tolist() == [0, 2] and b.nodes.tolist() == [1]


def test_dual_bfs_unreachable_to_a():
    g = Graph.from_edges(4, [(0, 1)])
    a, b = dual_bfs_split(g, make_ball(g, range(4)), 0, 1)
    assert a.nodes.tolist() == [0, 2, 3] and b.nodes.tolist() == [1]


def test_dual_bfs_rejects_foreign_center(path4):
    ball = make_ball(path4, [0, 1])
    with pytest.raises(ValueError, match="not in ball"):
        dual_bfs_split(path4, ball, 0, 3)
    with pytest.raises(ValueError, match="distinct"):
        dual_bfs_split(path4, ball, 0, 0)


def _bfs_distances(g: Graph, ball_nodes: np.ndarray, src: int) -> dict:
    """Single-source BFS inside the induced subgraph: the oracle."""
    allowed = set(ball_nodes.tolist())
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for u in g.neighbors_of(v):
            u = int(u)
            if u in allowed and u not in dist:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def test_dual_bfs_matches_distance_oracle():
    count = 0
    for seed in range(60):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 200))
        g = er_graph(n, min(1.0, 4.0 / n), rng)
        size = int(rng.integers(2, n + 1))
        nodes = np.sort(rng.choice(n, size=size, replace=False))
        ball = make_ball(g, nodes)
        va, vb = pick_split_centers(g, ball)
        a, b = dual_bfs_split(g, ball, va, vb)
        da = _bfs_distances(g, nodes, va)
        db = _bfs_distances(g, nodes, vb)
        inf = 10 ** 9
        for v in nodes:
            v = int(v)
            in_a = da.get(v, inf) <= db.get(v, inf)  # <= rule, unreachable -> A
            assert in_a == (v in set(a.nodes.tolist()))
        count += 1
        # children partition the ball
        assert sorted(a.nodes.tolist() + b.nodes.tolist()) == nodes.tolist()
    assert count == 60


# -- adaptive condition and recursion -----------------------------------

def test_adaptive_condition_examples():
    assert not adaptive_should_split(0.75, 0.5, 0.5)
    assert adaptive_should_split(1.0, 1.0, 1.5)
    assert not adaptive_should_split(1.0, 1.0, 1.0)  # strict


def test_split_recursive_path4_rejected(path4):
    out = split_ball_recursive(path4, make_ball(path4, range(4)), CoarsenConfig())
    assert len(out) == 1 and out[0].size == 4


def test_split_recursive_two_triangles_rejected(two_triangles_bridge):
    # parent 7/6 vs child mean (1.0+1.0)/2: dense parents resist splitting
    trace = []
    out = split_ball_recursive(two_triangles_bridge,
                               make_ball(two_triangles_bridge, range(6)),
                               CoarsenConfig(), trace=trace)
    assert len(out) == 1
    assert len(trace) == 1 and not trace[0].accepted
    assert trace[0].quality_a == 1.0 and trace[0].quality_b == 1.0


def test_split_recursive_purity_until_pure(path4):
    labels = np.array([0, 0, 1, 1])
    out = split_ball_recursive(path4, make_ball(path4, range(4)),
                               CoarsenConfig(mode=PURITY_THRESHOLD), labels)
    assert all(ball_purity(b, labels) == 1.0 for b in out)


def test_split_recursive_purity_needs_labels(path4):
    with pytest.raises(ValueError, match="labels"):
        split_ball_recursive(path4, make_ball(path4, range(4)),
                             CoarsenConfig(mode=PURITY_THRESHOLD))


def test_split_trace_strictness():
    rng = np.random.default_rng(0)
    g = er_graph(300, 0.05, rng)
    res = coarsen(g, CoarsenConfig(seed=3))
    assert res.trace, "expected at least one trial split"
    for rec in res.trace:
        mean_child = (rec.quality_a + rec.quality_b) / 2
        assert rec.accepted == (mean_child > rec.parent_quality)


def test_final_balls_are_fixed_points():
    for seed in range(5):
        g = er_graph(250, 0.04, np.random.default_rng(seed))
        res = coarsen(g, CoarsenConfig(seed=seed))
        for ball in res.partition.balls:
            if ball.size < 2:
                continue
            va, vb = pick_split_centers(g, ball)
            a, b = dual_bfs_split(g, ball, va, vb)
            assert not adaptive_should_split(ball.quality, a.quality, b.quality)


# -- coarsen driver -----------------------------------------------------

def test_coarsen_skip_flags(two_triangles_bridge):
    g = two_triangles_bridge
    res = coarsen(g, CoarsenConfig(skip_init=True, skip_split=True))
    assert res.partition.t == 1
    res = coarsen(g, CoarsenConfig(skip_split=True, initial_k=2, seed=0))
    assert res.partition.t == 2  # exactly the partitioner output
    res.partition.validate(g)


def test_coarsen_auto_k_floor_sqrt():
    g = er_graph(150, 0.05, np.random.default_rng(1))
    res = coarsen(g, CoarsenConfig(skip_split=True, seed=0))
    assert res.partition.t == 12  # floor(sqrt(150))


def test_coarsen_partition_invariants():
    for seed in range(8):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(30, 500))
        g = er_graph(n, min(1.0, 5.0 / n), rng)
        res = coarsen(g, CoarsenConfig(seed=seed))
        res.partition.validate(g)


def test_coarsen_deterministic():
    g = er_graph(400, 0.03, np.random.default_rng(9))
    r1 = coarsen(g, CoarsenConfig(seed=11))
    r2 = coarsen(g, CoarsenConfig(seed=11))
    assert np.array_equal(r1.partition.ball_of, r2.partition.ball_of)
    assert [b.nodes.tolist() for b in r1.partition.balls] == \
           [b.nodes.tolist() for b in r2.partition.balls]


def test_coarsen_purity_modes_valid():
    g, labels = sbm_graph([40, 40], 0.3, 0.02, np.random.default_rng(4))
    noisy = labels.copy()
    noisy[::5] = 1 - noisy[::5]
    for mode in (PURITY_THRESHOLD, PURITY_AND_AD):
        res = coarsen(g, CoarsenConfig(mode=mode, seed=2), labels=noisy)
        res.partition.validate(g)
    # purity threshold reached on every splittable final ball
    res = coarsen(g, CoarsenConfig(mode=PURITY_THRESHOLD, seed=2), labels=noisy)
    for ball in res.partition.balls:
        if ball.size >= 2:
            assert ball_purity(ball, noisy) == 1.0


def test_coarsen_isolated_nodes_admitted():
    g = Graph.from_edges(10, [(0, 1), (1, 2)])  # nodes 3..9 isolated
    res = coarsen(g, CoarsenConfig(seed=0))
    res.partition.validate(g)


def test_ball_partition_file_round_trip(tmp_path):
    g = er_graph(120, 0.06, np.random.default_rng(2))
    res = coarsen(g, CoarsenConfig(seed=5))
    path = tmp_path / "balls.txt"
    save_ball_partition(path, res.partition)
    p2 = load_ball_partition(path, g)
    assert np.array_equal(p2.ball_of, res.partition.ball_of)
    assert [b.nodes.tolist() for b in p2.balls] == \
           [b.nodes.tolist() for b in res.partition.balls]


def test_config_validation(triangle):
    with pytest.raises(ValueError):
        CoarsenConfig(mode="bogus").validate()
    with pytest.raises(ValueError):
        CoarsenConfig(purity_threshold=0.0).validate()
    with pytest.raises(ValueError):
        CoarsenConfig(initial_k=5).validate(triangle)
