import numpy as np
import pytest

from granball import _kernels
from granball.graph import Graph


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    """Compile the jitted kernels once so timing tests stay honest."""
    _kernels.warmup()


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (2, 0)])


@pytest.fixture
def path4():
    ids = np.arange(3)
    return Graph.from_edges(4, np.column_stack([ids, ids + 1]))


@pytest.fixture
def star6():
    return Graph.from_edges(6, [(0, i) for i in range(1, 6)])


@pytest.fixture
def two_triangles_bridge():
    """Triangles {0,1,2} and {3,4,5} joined by the edge (2,3)."""
    return Graph.from_edges(
        6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (2, 3)])


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    """Small dense-ish ER helper for property tests."""
    mask = rng.random((n, n)) < p
    mask = np.triu(mask, 1)
    edges = np.argwhere(mask)
    return Graph.from_edges(n, edges)
