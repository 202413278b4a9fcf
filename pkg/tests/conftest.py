import itertools

import networkx as nx
import numpy as np
import pytest

from config import CONFIG
from models.cube_complex import majority_bits_algebra, path_algebra, tree_algebra
from models.median_algebra import FiniteMedianAlgebra


def close_enough(a, b, tolerance):
    """Relative comparison in the style of the floating metric checks."""
    return abs(a - b) <= tolerance * max(1.0, abs(a), abs(b))


def random_tree_edges(n, seed):
    """Edges of a seeded random recursive tree on vertices 0..n-1."""
    rng = np.random.default_rng(seed)
    return [(int(rng.integers(0, v)), v) for v in range(1, n)]


def random_tree_graph(n, seed):
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    graph.add_edges_from(random_tree_edges(n, seed))
    return graph


def random_unicyclic_graph(n, seed):
    """A random tree plus one edge closing a cycle."""
    graph = random_tree_graph(n, seed)
    lengths = dict(nx.all_pairs_shortest_path_length(graph))
    candidates = [(a, b) for a, b in itertools.combinations(range(n), 2) if lengths[a][b] >= 2]
    rng = np.random.default_rng(seed + 1)
    a, b = candidates[int(rng.integers(0, len(candidates)))]
    graph.add_edge(a, b)
    return graph


def is_med_closed(M: FiniteMedianAlgebra, subset) -> bool:
    members = set(subset)
    return all(M.med(x, y, z) in members for x, y, z in itertools.product(members, repeat=3))


def convex_bipartitions(M: FiniteMedianAlgebra):
    """
    Brute-force walls: every split {S, M - S} with both sides med-convex.

    Returns the set of sides containing the first element.
    """
    n = len(M)
    first, rest = M.elements[0], M.elements[1:]

    def convex(side):
        members = set(side)
        return all(M.med(a, b, z) != z or z in members
                   for a, b in itertools.product(members, repeat=2) for z in M.elements)

    found = set()
    for size in range(0, n - 1):
        for extra in itertools.combinations(rest, size):
            half = frozenset((first, *extra))
            cohalf = frozenset(M.elements) - half
            if convex(half) and convex(cohalf):
                found.add(half)
    return found


@pytest.fixture
def square():
    """The 2-cube with bit-tuple labels."""
    return majority_bits_algebra(2)


@pytest.fixture
def cube3():
    return majority_bits_algebra(3)


@pytest.fixture
def path5():
    return path_algebra(5)


@pytest.fixture
def small_tree():
    # 0 - 1 - 2, 1 - 3, 3 - 4
    return tree_algebra(range(5), [(0, 1), (1, 2), (1, 3), (3, 4)])


@pytest.fixture
def caps(monkeypatch):
    """Override CONFIG caps for one test."""
    def override(**values):
        for key, value in values.items():
            monkeypatch.setitem(CONFIG, key, value)
    return override


@pytest.fixture(autouse=True)
def no_log_file(monkeypatch, tmp_path):
    monkeypatch.setitem(CONFIG, 'LOG_TO_FILE', False)
    monkeypatch.setitem(CONFIG, 'LOG_DIR', str(tmp_path / "logs"))
