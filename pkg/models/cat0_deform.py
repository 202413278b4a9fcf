"""
The sigma_d deformation of a finite median metric space.

Every pair (x, y) gets its maximal diagonal cube Q(x, y), weighted by the
Euclidean norm of its block lengths; sigma_d is the shortest-path metric of
those weights on the complete graph.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path

from config import CONFIG
from models.errors import ConsistencyError, InputError
from models.median_algebra import (FiniteMedianAlgebra, Label, Wall, crossing_matrix, enumerate_walls,
                                   interval_ids, rank, wall_membership)
from models.median_metrics import FiniteMetric, MetricMedianAlgebraInstance, wall_thickness

logger = logging.getLogger('coarsemed.cat0_deform')


@dataclass(frozen=True)
class DiagonalCube:
    """The maximal cube with diagonal {x, y}"""
    endpoints: Tuple[Label, Label]
    blocks: Tuple[Tuple[Wall, ...], ...]
    vertices: Tuple[Label, ...]
    block_lengths: Tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.blocks)


def _block_indices(M: FiniteMedianAlgebra, i: int, j: int) -> List[List[int]]:
    membership = wall_membership(M)
    separating = np.flatnonzero(membership[:, i] != membership[:, j])
    crosses = crossing_matrix(membership[separating])
    graph = nx.Graph()
    graph.add_nodes_from(range(len(separating)))
    apart = ~crosses
    np.fill_diagonal(apart, False)
    graph.add_edges_from((int(a), int(b)) for a, b in np.argwhere(np.triu(apart)))
    blocks = [sorted(int(separating[c]) for c in component)
              for component in nx.connected_components(graph)]
    return sorted(blocks)


def interval_blocks(M: FiniteMedianAlgebra, x: Label, y: Label) -> List[Tuple[Wall, ...]]:
    """
    Partition of the walls separating x and y into components of the non-crossing relation.

    Raises:
        InputError: If x = y
    """
    if x == y:
        raise InputError("interval blocks need two distinct points")
    walls = enumerate_walls(M)
    return [tuple(walls[w] for w in block) for block in _block_indices(M, M.id_of(x), M.id_of(y))]


def _wall_lengths(M: FiniteMedianAlgebra, d: FiniteMetric) -> np.ndarray:
    thickness = wall_thickness(MetricMedianAlgebraInstance(M, d))
    walls = enumerate_walls(M)
    return np.array([thickness[wall][1] for wall in walls], dtype=np.float64)


def maximal_diagonal_cube(M: FiniteMedianAlgebra, d: FiniteMetric, x: Label, y: Label,
                          validate: bool = True, lengths: Optional[np.ndarray] = None) -> DiagonalCube:
    """
    Build Q(x, y): one dimension per interval block, corners picked from interval(x, y).

    Args:
        M (FiniteMedianAlgebra): Verified median algebra
        d (FiniteMetric): Median metric on M
        x, y: Distinct elements
        validate (bool): Run the brute-force maximality search when the interval
            is at most ``CUBE_ORACLE_CAP`` points
        lengths (Optional[np.ndarray]): Precomputed wall lengths in wall order

    Raises:
        ConsistencyError: If a corner is missing or the search finds a different maximal cube
    """
    i, j = M.id_of(x), M.id_of(y)
    if i == j:
        raise InputError("a diagonal cube needs two distinct points")
    walls = enumerate_walls(M)
    membership = wall_membership(M)
    blocks = _block_indices(M, i, j)
    if lengths is None:
        lengths = _wall_lengths(M, d)

    inside = interval_ids(M, i, j)
    by_column = {membership[:, z].tobytes(): int(z) for z in inside}
    corners = []
    for choice in itertools.product((False, True), repeat=len(blocks)):
        column = membership[:, i].copy()
        for selected, block in zip(choice, blocks):
            if selected:
                column[block] = ~column[block]
        z = by_column.get(column.tobytes())
        if z is None:
            raise ConsistencyError(f"no corner of Q({x!r}, {y!r}) for choice {choice}",
                                   witness=(x, y))
        corners.append(z)

    cube = DiagonalCube(
        endpoints=(x, y),
        blocks=tuple(tuple(walls[w] for w in block) for block in blocks),
        vertices=tuple(M.labels_of(corners)),
        block_lengths=tuple(float(lengths[block].sum()) for block in blocks),
    )
    if validate and len(inside) <= CONFIG['CUBE_ORACLE_CAP']:
        _check_maximal(M, i, j, inside, corners)
    return cube


def _is_cube(membership: np.ndarray, separating: np.ndarray, subset: Sequence[int]) -> bool:
    rows = membership[np.ix_(separating, subset)]
    oriented = rows ^ rows[:, :1]
    blocks = np.unique(oriented, axis=0).shape[0]
    return 2 ** blocks == len(subset)


def _check_maximal(M: FiniteMedianAlgebra, i: int, j: int, inside: np.ndarray, corners: List[int]):
    membership = wall_membership(M)
    separating = np.flatnonzero(membership[:, i] != membership[:, j])
    others = [int(z) for z in inside if z not in (i, j)]

    cubes = []
    for size in range(len(others) + 1):
        if (size + 2) & (size + 1):
            continue
        for extra in itertools.combinations(others, size):
            subset = [i, j, *extra]
            if _is_cube(membership, separating, subset):
                cubes.append(frozenset(subset))

    maximal = [c for c in cubes if not any(c < other for other in cubes)]
    expected = frozenset(corners)
    if maximal != [expected]:
        witness = tuple(M.labels_of((i, j)))
        logger.error(f"Maximal cube search for {witness} found {len(maximal)} maximal cubes")
        raise ConsistencyError("non-crossing components disagree with the maximal cube search",
                               witness=witness)


def cube_weight(Q: DiagonalCube) -> float:
    """omega(Q): Euclidean norm of the block lengths."""
    return math.sqrt(sum(length * length for length in Q.block_lengths))


def cat0_metric(M: FiniteMedianAlgebra, d: FiniteMetric) -> FiniteMetric:
    """
    sigma_d as all-pairs shortest paths with edge weights omega(Q(x, y)).

    Raises:
        ConsistencyError: If d / sqrt(rank) <= sigma_d <= d fails beyond tolerance
    """
    n = len(M)
    d = d.reordered(M.elements) if d.points != M.elements else d
    if n == 1:
        return FiniteMetric(M.elements, np.zeros((1, 1)))

    lengths = _wall_lengths(M, d)
    weights = np.zeros((n, n), dtype=np.float64)
    for a, b in itertools.combinations(range(n), 2):
        cube = maximal_diagonal_cube(M, d, M.elements[a], M.elements[b], validate=False, lengths=lengths)
        weights[a, b] = weights[b, a] = cube_weight(cube)

    sigma = shortest_path(weights, method='D', directed=False)
    sigma = np.minimum(sigma, sigma.T)
    np.fill_diagonal(sigma, 0.0)

    dimension = rank(M)
    D = d.dist
    tol = CONFIG['TOLERANCE']
    slack = tol * np.maximum(1.0, D)
    lower = D / math.sqrt(dimension)
    bad = np.argwhere((sigma < lower - slack) | (sigma > D + slack))
    if len(bad):
        a, b = bad[0]
        logger.error(f"sigma_d sandwich fails at {M.elements[a]!r}, {M.elements[b]!r}: "
                     f"d={D[a, b]}, sigma={sigma[a, b]}, rank={dimension}")
        raise ConsistencyError("sigma_d violates the d/sqrt(rank) <= sigma_d <= d sandwich",
                               witness=tuple(M.labels_of((a, b))))

    logger.info(f"Computed sigma_d on {n} points (rank {dimension})")
    return FiniteMetric(M.elements, sigma)


def sandwich_rows(M: FiniteMedianAlgebra, d: FiniteMetric, sigma: FiniteMetric) -> List[Dict]:
    """Rows of (pair, d, sigma_d, lower bound, upper bound) for CSV export."""
    dimension = max(rank(M), 1)
    rows = []
    for a, b in itertools.combinations(M.elements, 2):
        dist = d.d(a, b)
        rows.append({
            "x": a,
            "y": b,
            "d": dist,
            "sigma": sigma.d(a, b),
            "lower": dist / math.sqrt(dimension),
            "upper": dist,
        })
    return rows
