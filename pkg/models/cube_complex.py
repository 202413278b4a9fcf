"""
Finite CAT(0) cube complexes through their vertex median algebras.

Only the 1-skeleton is materialised; higher cubes are handled wall-combinatorially.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path

from config import CONFIG
from models.errors import CapExceededError, ConsistencyError, InputError
from models.median_algebra import FiniteMedianAlgebra, Label, Wall, enumerate_walls, wall_membership

logger = logging.getLogger('coarsemed.cube_complex')

Edge = Tuple[Label, Label]


@dataclass(frozen=True)
class CubeComplexSkeleton:
    """Vertices, edges and the wall each edge crosses"""
    vertices: Tuple[Label, ...]
    edges: Tuple[Edge, ...]
    edge_wall: Dict[Edge, Wall]
    walls: Tuple[Wall, ...]

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        graph.add_edges_from(self.edges)
        return graph

    def to_dict(self):
        """Index-based export: vertices, edges as index pairs, the wall index of each edge, wall halves."""
        position = {v: i for i, v in enumerate(self.vertices)}
        wall_index = {wall: w for w, wall in enumerate(self.walls)}
        return {
            "vertices": list(self.vertices),
            "edges": [[position[a], position[b]] for a, b in self.edges],
            "edge_wall": [wall_index[self.edge_wall[edge]] for edge in self.edges],
            "walls": [{"half": [v for v in self.vertices if v in wall.half]} for wall in self.walls],
        }


def separation_counts(M: FiniteMedianAlgebra) -> np.ndarray:
    """Matrix of |W(a|b)| over all pairs."""
    membership = wall_membership(M).astype(np.int64)
    if membership.shape[0] == 0:
        return np.zeros((len(M), len(M)), dtype=np.int64)
    return (membership[:, :, None] != membership[:, None, :]).sum(axis=0)


def one_skeleton(M: FiniteMedianAlgebra) -> CubeComplexSkeleton:
    """
    The 1-skeleton: an edge joins a and b exactly when one wall separates them.

    Raises:
        ConsistencyError: If the skeleton is disconnected or its graph metric
            disagrees with wall counting
    """
    walls = enumerate_walls(M)
    membership = wall_membership(M)
    counts = separation_counts(M)

    edges: List[Edge] = []
    edge_wall: Dict[Edge, Wall] = {}
    for i, j in zip(*np.nonzero(np.triu(counts == 1))):
        edge = (M.elements[i], M.elements[j])
        w = int(np.flatnonzero(membership[:, i] != membership[:, j])[0])
        edges.append(edge)
        edge_wall[edge] = walls[w]

    skeleton = CubeComplexSkeleton(tuple(M.elements), tuple(edges), edge_wall, tuple(walls))
    graph = skeleton.to_networkx()
    if not nx.is_connected(graph):
        logger.error(f"Skeleton of {M!r} is disconnected")
        raise ConsistencyError("1-skeleton is disconnected")

    adjacency = (counts == 1).astype(np.int8)
    hops = shortest_path(adjacency, method='D', unweighted=True, directed=False)
    mismatch = np.argwhere(hops != counts)
    if len(mismatch):
        a, b = mismatch[0]
        raise ConsistencyError("graph distance differs from wall count",
                               witness=tuple(M.labels_of((a, b))))

    logger.debug(f"Skeleton of {M!r}: {len(edges)} edges, {len(walls)} walls")
    return skeleton


def parallel_classes(skel: CubeComplexSkeleton) -> Dict[Wall, List[Edge]]:
    """Edges grouped by the wall they cross, in wall order."""
    classes: Dict[Wall, List[Edge]] = {wall: [] for wall in skel.walls}
    for edge in skel.edges:
        classes[skel.edge_wall[edge]].append(edge)
    return classes


# ----------------------------------------------------------------------
# standard models
# ----------------------------------------------------------------------
def majority_bits_algebra(dim: int, labels: Optional[Sequence[Label]] = None) -> FiniteMedianAlgebra:
    """
    The vertex algebra of the ``dim``-cube with coordinatewise majority.

    Element i stands for the bit vector of i (most significant bit first);
    without ``labels`` the elements are the bit tuples themselves.
    """
    if dim < 0:
        raise InputError("hypercube dimension must be non-negative")
    bits = list(itertools.product((0, 1), repeat=dim))
    if labels is None:
        labels = bits
    elif len(labels) != len(bits):
        raise InputError(f"majority_bits of dimension {dim} needs {len(bits)} elements, got {len(labels)}")
    labels = tuple(labels)
    if len(labels) > CONFIG['TABLE_CAP']:
        raise CapExceededError(f"hypercube of dimension {dim} exceeds cap {CONFIG['TABLE_CAP']}")

    lookup = {label: bits[i] for i, label in enumerate(labels)}
    by_bits = {b: label for label, b in lookup.items()}

    def rule(x, y, z):
        return by_bits[tuple(int(a + b + c >= 2) for a, b, c in zip(lookup[x], lookup[y], lookup[z]))]

    def build():
        B = np.array(bits, dtype=np.int64).reshape(len(bits), dim)
        weights = 2 ** np.arange(dim - 1, -1, -1, dtype=np.int64)
        majority = (B[:, None, None, :] + B[None, :, None, :] + B[None, None, :, :]) >= 2
        return majority.astype(np.int64) @ weights

    return FiniteMedianAlgebra.from_rule(labels, rule, table_builder=build, kind=f"majority_bits({dim})")


def tree_algebra(vertices: Sequence[Label], edges: Sequence[Tuple[Label, Label]]) -> FiniteMedianAlgebra:
    """
    The vertex algebra of a finite tree: med(x, y, z) minimises d(x,.)+d(y,.)+d(z,.).

    Raises:
        InputError: If the edge list does not describe a tree on ``vertices``
    """
    vertices = tuple(vertices)
    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    for a, b in edges:
        if a not in graph or b not in graph:
            raise InputError(f"tree edge ({a!r}, {b!r}) uses an unknown vertex")
        graph.add_edge(a, b)
    if len(graph) != len(vertices) or not nx.is_tree(graph):
        raise InputError("edge list does not describe a tree")

    position = {v: i for i, v in enumerate(vertices)}
    D = np.zeros((len(vertices), len(vertices)), dtype=np.int64)
    for source, lengths in nx.all_pairs_shortest_path_length(graph):
        for target, length in lengths.items():
            D[position[source], position[target]] = length

    def rule(x, y, z):
        total = D[position[x]] + D[position[y]] + D[position[z]]
        return vertices[int(np.argmin(total))]

    def build():
        n = len(vertices)
        table = np.empty((n, n, n), dtype=np.int32)
        for x in range(n):
            total = D[x][None, None, :] + D[:, None, :] + D[None, :, :]
            table[x] = np.argmin(total, axis=-1)
        return table

    return FiniteMedianAlgebra.from_rule(vertices, rule, table_builder=build, kind="tree")


def path_algebra(n: int) -> FiniteMedianAlgebra:
    if n < 1:
        raise InputError("a path needs at least one vertex")
    return tree_algebra(range(n), [(i, i + 1) for i in range(n - 1)])


def product(M1: FiniteMedianAlgebra, M2: FiniteMedianAlgebra) -> FiniteMedianAlgebra:
    """
    The product algebra on pairs with componentwise median.

    Raises:
        CapExceededError: If |M1| * |M2| exceeds ``TABLE_CAP``
    """
    n1, n2 = len(M1), len(M2)
    if n1 * n2 > CONFIG['TABLE_CAP']:
        raise CapExceededError(f"product of sizes {n1} and {n2} exceeds cap {CONFIG['TABLE_CAP']}")
    labels = [(a, b) for a in M1.elements for b in M2.elements]

    def index_median(i, j, k):
        first = M1.med_index(i // n2, j // n2, k // n2)
        second = M2.med_index(i % n2, j % n2, k % n2)
        return first * n2 + second

    def build():
        T1, T2 = M1.table, M2.table
        if T1 is None or T2 is None:
            n = n1 * n2
            table = np.empty((n, n, n), dtype=np.int32)
            for i, j, k in itertools.product(range(n), repeat=3):
                table[i, j, k] = index_median(i, j, k)
            return table
        ids = np.arange(n1 * n2)
        q, r = ids // n2, ids % n2
        return (T1[q[:, None, None], q[None, :, None], q[None, None, :]] * n2
                + T2[r[:, None, None], r[None, :, None], r[None, None, :]])

    algebra = FiniteMedianAlgebra(labels, index_median, table_builder=build,
                                  kind=f"product({M1.kind},{M2.kind})")
    logger.debug(f"Built {algebra!r}")
    return algebra


def grid_algebra(n: int, m: int) -> FiniteMedianAlgebra:
    return product(path_algebra(n), path_algebra(m))


def standard_models(kind: str, size) -> FiniteMedianAlgebra:
    """
    Vertex median algebras of the standard complexes.

    Args:
        kind (str): One of 'hypercube', 'path', 'tree', 'grid'
        size: Dimension (hypercube), vertex count (path), edge list (tree) or (n, m) (grid)

    Raises:
        InputError: For an unknown kind or a malformed size
    """
    if kind == "hypercube":
        return majority_bits_algebra(int(size))
    if kind == "path":
        return path_algebra(int(size))
    if kind == "tree":
        edges = [tuple(edge) for edge in size]
        if any(len(edge) != 2 for edge in edges):
            raise InputError("tree edges must be pairs")
        vertices: List[Hashable] = []
        for edge in edges:
            for v in edge:
                if v not in vertices:
                    vertices.append(v)
        if not vertices:
            raise InputError("tree edge list is empty")
        return tree_algebra(sorted(vertices, key=lambda v: (str(type(v)), v)), edges)
    if kind == "grid":
        n, m = size
        return grid_algebra(int(n), int(m))
    raise InputError(f"unknown standard model {kind!r}")
