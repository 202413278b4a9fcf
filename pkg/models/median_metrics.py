"""
Metrics on finite median algebras.

Covers wall-weighted metrics, the median-metric test for arbitrary finite
metrics, edge and wall thickness, rectification and its monotonicity along
nested subalgebras.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

from config import CONFIG
from models.cube_complex import one_skeleton, parallel_classes
from models.errors import CapExceededError, ConsistencyError, InputError
from models.median_algebra import (FiniteMedianAlgebra, Label, Wall, enumerate_walls,
                                   median_closure, wall_membership)
from utils.helpers import make_sampler

logger = logging.getLogger('coarsemed.median_metrics')

THICKNESS_MAX = "max"
THICKNESS_MIN = "min"


@dataclass(frozen=True, eq=False)
class FiniteMetric:
    """
    A finite metric space given by its distance matrix.

    Construction validates symmetry, the zero diagonal, positivity off the
    diagonal and the triangle inequality over all triples.
    """
    points: Tuple[Label, ...]
    dist: np.ndarray
    index: Dict[Label, int] = field(init=False, repr=False)

    def __post_init__(self):
        points = tuple(self.points)
        dist = np.array(self.dist, dtype=np.float64)
        n = len(points)
        if n == 0:
            raise InputError("a metric needs at least one point")
        if len(set(points)) != n:
            raise InputError("duplicate metric points")
        if dist.shape != (n, n):
            raise InputError(f"distance matrix must have shape {(n, n)}, got {dist.shape}")
        if not np.all(np.isfinite(dist)):
            raise InputError("distance matrix has non-finite entries")
        if not np.array_equal(dist, dist.T):
            raise InputError("distance matrix is not symmetric")
        if np.any(np.diag(dist) != 0):
            raise InputError("distance matrix has a non-zero diagonal")
        off = ~np.eye(n, dtype=bool)
        if np.any(dist[off] <= 0):
            i, j = np.argwhere((dist <= 0) & off)[0]
            raise InputError(f"distinct points {points[i]!r}, {points[j]!r} are at distance {dist[i, j]}")

        tol = tolerance_for(dist)
        for k in range(n):
            slack = dist[:, k, None] + dist[None, k, :] - dist
            if np.any(slack < -tol * np.maximum(1.0, dist)):
                i, j = np.argwhere(slack < -tol * np.maximum(1.0, dist))[0]
                raise InputError(f"triangle inequality fails for {points[i]!r}, {points[k]!r}, {points[j]!r}")

        dist.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'dist', dist)
        object.__setattr__(self, 'index', {p: i for i, p in enumerate(points)})

    def __len__(self):
        return len(self.points)

    def d(self, x: Label, y: Label) -> float:
        try:
            return float(self.dist[self.index[x], self.index[y]])
        except KeyError as e:
            raise InputError(f"{e.args[0]!r} is not a point of the metric")

    def restrict(self, subset: Iterable[Label]) -> "FiniteMetric":
        """The metric restricted to ``subset`` (kept in the given order)."""
        subset = tuple(subset)
        ids = [self.index[p] for p in subset]
        return FiniteMetric(subset, self.dist[np.ix_(ids, ids)])

    def reordered(self, order: Sequence[Label]) -> "FiniteMetric":
        if set(order) != set(self.points) or len(order) != len(self.points):
            raise InputError("metric points do not match the requested order")
        return self.restrict(order)


def tolerance_for(dist: np.ndarray) -> float:
    """Zero for integer-valued matrices, the configured relative tolerance otherwise."""
    if np.array_equal(dist, np.round(dist)):
        return 0.0
    return CONFIG['TOLERANCE']


def graph_metric(graph: nx.Graph, nodes: Optional[Sequence[Label]] = None,
                 weight: Optional[str] = None) -> FiniteMetric:
    """
    Shortest-path metric of a connected graph.

    Raises:
        InputError: If the graph is disconnected
    """
    nodes = tuple(nodes) if nodes is not None else tuple(graph.nodes)
    if not nx.is_connected(graph):
        raise InputError("graph is disconnected")
    adjacency = nx.to_scipy_sparse_array(graph, nodelist=nodes, weight=weight)
    dist = shortest_path(adjacency, method='D', directed=False, unweighted=weight is None)
    return FiniteMetric(nodes, dist)


def coordinate_metric(points: Sequence[Tuple[float, ...]], p: float = 2.0) -> FiniteMetric:
    """The l_p metric on coordinate tuples, with the tuples as point labels."""
    points = tuple(tuple(point) for point in points)
    coords = np.array(points, dtype=np.float64)
    return FiniteMetric(points, cdist(coords, coords, 'minkowski', p=p))


@dataclass(frozen=True)
class WallWeighting:
    """Strictly positive lengths on every wall of an algebra"""
    lengths: Mapping[Wall, float]

    def __post_init__(self):
        for wall, length in self.lengths.items():
            if not length > 0:
                raise InputError(f"wall lengths must be positive, got {length}")

    @classmethod
    def uniform(cls, M: FiniteMedianAlgebra, length: float = 1.0) -> "WallWeighting":
        return cls({wall: float(length) for wall in enumerate_walls(M)})

    @classmethod
    def from_indices(cls, M: FiniteMedianAlgebra, lengths: Mapping[int, float]) -> "WallWeighting":
        """Lengths keyed by position in the canonical wall order."""
        walls = enumerate_walls(M)
        weights = {}
        for key, length in lengths.items():
            w = int(key)
            if not 0 <= w < len(walls):
                raise InputError(f"wall index {key} out of range (algebra has {len(walls)} walls)")
            weights[walls[w]] = float(length)
        return cls(weights)

    def vector(self, walls: Sequence[Wall]) -> np.ndarray:
        missing = [w for w, wall in enumerate(walls) if wall not in self.lengths]
        if missing:
            raise InputError(f"missing wall length for wall index {missing[0]}")
        return np.array([self.lengths[wall] for wall in walls], dtype=np.float64)


@dataclass(frozen=True)
class MetricMedianAlgebraInstance:
    """A median algebra together with a metric on the same points (stored in algebra order)"""
    algebra: FiniteMedianAlgebra
    metric: FiniteMetric

    def __post_init__(self):
        if self.metric.points != self.algebra.elements:
            object.__setattr__(self, 'metric', self.metric.reordered(self.algebra.elements))

    def restrict(self, subset: Iterable[Label]) -> "MetricMedianAlgebraInstance":
        """The induced sub-instance on a med-closed subset."""
        sub = self.algebra.subalgebra(subset)
        return MetricMedianAlgebraInstance(sub, self.metric.restrict(sub.elements))


def wall_metric(M: FiniteMedianAlgebra, w: WallWeighting) -> FiniteMetric:
    """
    d_l(a, b) = sum of l(W) over the walls separating a and b.

    Raises:
        InputError: If a wall has no length
    """
    walls = enumerate_walls(M)
    lengths = w.vector(walls)
    inside = wall_membership(M).astype(np.float64)
    outside = 1.0 - inside
    dist = (inside.T * lengths) @ outside + (outside.T * lengths) @ inside
    return FiniteMetric(M.elements, dist)


@dataclass
class MetricMedianReport:
    """Result of verify_median_metric"""
    ok: bool
    table: Optional[np.ndarray] = None
    witness: Optional[Tuple[Label, Label, Label]] = None
    intersection: Tuple[Label, ...] = ()

    def algebra(self, X: FiniteMetric) -> FiniteMedianAlgebra:
        """The intrinsic median algebra on the points of ``X``."""
        if not self.ok:
            raise ConsistencyError("metric is not median", witness=self.witness)
        return FiniteMedianAlgebra.from_table(X.points, self.table)

    def to_dict(self):
        return {
            "ok": self.ok,
            "witness": list(self.witness) if self.witness else None,
            "intersection": list(self.intersection),
        }


# elements per streamed block of interval rows
STREAM_BLOCK = 1 << 20


def _between_rows(D: np.ndarray, rows: Sequence[int], tol: float) -> np.ndarray:
    """between[r, b, w]: w lies in the metric interval I(rows[r], b)."""
    through = D[rows][:, None, :] + D[None, :, :]
    return np.abs(through - D[rows][:, :, None]) <= tol * np.maximum(1.0, through)


def verify_median_metric(X: FiniteMetric) -> MetricMedianReport:
    """
    Decide whether every triple's three metric intervals meet in exactly one point.

    Args:
        X (FiniteMetric): Candidate median metric

    Returns:
        MetricMedianReport: ``table`` holds the intrinsic median when ok, otherwise
        ``witness`` is the first bad triple and ``intersection`` its interval meet

    Raises:
        CapExceededError: If X is larger than ``MATERIALIZE_CAP``
    """
    n = len(X)
    if n > CONFIG['MATERIALIZE_CAP']:
        raise CapExceededError(f"median-metric check on {n} points exceeds cap {CONFIG['MATERIALIZE_CAP']}")
    D = X.dist
    tol = tolerance_for(D)
    between = _between_rows(D, np.arange(n), tol)

    table = np.empty((n, n, n), dtype=np.int32)
    for x in range(n):
        meet = between[x][:, None, :] & between[x][None, :, :] & between
        counts = meet.sum(axis=-1)
        bad = np.argwhere(counts != 1)
        if len(bad):
            y, z = bad[0]
            witness = (X.points[x], X.points[y], X.points[z])
            inside = tuple(X.points[w] for w in np.flatnonzero(meet[y, z]))
            logger.info(f"Metric is not median: intervals of {witness} meet in {len(inside)} points")
            return MetricMedianReport(ok=False, witness=witness, intersection=inside)
        table[x] = np.argmax(meet, axis=-1)

    logger.debug(f"Metric on {n} points is median")
    return MetricMedianReport(ok=True, table=table)


def verify_median_metric_for(M: FiniteMedianAlgebra, X: FiniteMetric) -> MetricMedianReport:
    """
    Decide whether X is a median metric whose median is the median of M.

    The interval meets are streamed one x at a time in blocks of y and no
    (n, n, n) array is held; M is read through its table only when that is
    materialised. Triples are taken with x <= y <= z.

    Args:
        M (FiniteMedianAlgebra): Algebra on the points of X
        X (FiniteMetric): Candidate median metric

    Returns:
        MetricMedianReport: ``table`` is always None; on failure ``witness`` is
        the first bad triple and ``intersection`` its interval meet

    Raises:
        InputError: If X is not a metric on the elements of M
        CapExceededError: If M is larger than ``TABLE_CAP``
    """
    n = len(M)
    if n > CONFIG['TABLE_CAP']:
        raise CapExceededError(f"median-metric check on {n} points exceeds cap {CONFIG['TABLE_CAP']}")
    if set(X.points) != set(M.elements):
        raise InputError("metric points differ from the algebra elements")
    order = [X.index[e] for e in M.elements]
    D = X.dist[np.ix_(order, order)]
    tol = tolerance_for(D)
    block = max(1, STREAM_BLOCK // max(1, n * n))
    table = M.table

    def failure(x, y, z, meet):
        witness = tuple(M.labels_of((x, y, z)))
        inside = tuple(M.labels_of(np.flatnonzero(meet)))
        logger.info(f"Metric median differs from {M!r} at {witness}: intervals meet in {inside}")
        return MetricMedianReport(ok=False, witness=witness, intersection=inside)

    for x in range(n):
        from_x = _between_rows(D, [x], tol)[0]
        for start in range(x, n, block):
            ys = np.arange(start, min(n, start + block))
            meet = from_x[ys][:, None, :] & from_x[None, :, :] & _between_rows(D, ys, tol)
            counts = meet.sum(axis=-1)
            medians = np.argmax(meet, axis=-1)
            for k, y in enumerate(ys.tolist()):
                bad = np.flatnonzero(counts[k, y:] != 1)
                if len(bad):
                    z = y + int(bad[0])
                    return failure(x, y, z, meet[k, z])
                if table is not None:
                    expected = table[x, y, y:]
                else:
                    expected = np.fromiter((M.med_index(x, y, z) for z in range(y, n)),
                                           dtype=np.int64, count=n - y)
                wrong = np.flatnonzero(medians[k, y:] != expected)
                if len(wrong):
                    z = y + int(wrong[0])
                    return failure(x, y, z, meet[k, z])

    logger.debug(f"Metric on {n} points is median with the median of {M!r}")
    return MetricMedianReport(ok=True)


def edge_thickness(inst: MetricMedianAlgebraInstance) -> Dict[Tuple[Label, Label], float]:
    """lambda(e) = d(e-, e+) for every skeleton edge."""
    skel = one_skeleton(inst.algebra)
    return {edge: inst.metric.d(*edge) for edge in skel.edges}


def wall_thickness(inst: MetricMedianAlgebraInstance) -> Dict[Wall, Tuple[float, float]]:
    """
    Per wall, the minimum and maximum thickness of the edges crossing it.

    Returns:
        Dict[Wall, Tuple[float, float]]: (lambda_min, lambda_max) in wall order
    """
    skel = one_skeleton(inst.algebra)
    thickness = {}
    for wall, edges in parallel_classes(skel).items():
        values = [inst.metric.d(a, b) for a, b in edges]
        thickness[wall] = (min(values), max(values))
    return thickness


def rectified_metric(inst: MetricMedianAlgebraInstance, thickness: str = THICKNESS_MAX) -> FiniteMetric:
    """
    The wall metric with lambda_max (or lambda_min) lengths.

    Raises:
        InputError: For an unknown thickness selector
        ConsistencyError: If the max-rectified metric falls below the input somewhere
    """
    if thickness not in (THICKNESS_MAX, THICKNESS_MIN):
        raise InputError(f"thickness must be 'max' or 'min', got {thickness!r}")
    picked = 1 if thickness == THICKNESS_MAX else 0
    lengths = {wall: pair[picked] for wall, pair in wall_thickness(inst).items()}
    rectified = wall_metric(inst.algebra, WallWeighting(lengths))

    if thickness == THICKNESS_MAX:
        D, R = inst.metric.dist, rectified.dist
        below = np.argwhere(R < D - tolerance_for(D) * np.maximum(1.0, D))
        if len(below):
            i, j = below[0]
            raise ConsistencyError("rectified metric is smaller than the input",
                                   witness=tuple(inst.algebra.labels_of((i, j))))
    return rectified


@dataclass
class MonotonicityReport:
    checked: int = 0
    violations: List[Tuple[Label, Label, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "ok": self.ok,
            "checked": self.checked,
            "violations": [{"x": x, "y": y, "inner": a, "outer": b} for x, y, a, b in self.violations],
        }


def check_monotonicity(ambient: MetricMedianAlgebraInstance,
                       pairs: Iterable[Tuple[Iterable[Label], Iterable[Label]]],
                       x: Optional[Label] = None, y: Optional[Label] = None,
                       thickness: str = THICKNESS_MAX) -> MonotonicityReport:
    """
    Check d_mu^M(x, y) <= d_mu^N(x, y) for nested med-closed M within N.

    Without ``x`` and ``y`` every pair of M is compared. Both sides are rectified
    with the same ``thickness`` selector.

    Raises:
        InputError: If M is not inside N, a subset is not med-closed, or x, y are not in M
    """
    report = MonotonicityReport()
    for inner, outer in pairs:
        inner, outer = list(inner), list(outer)
        if not set(inner) <= set(outer):
            raise InputError("inner subalgebra is not contained in the outer one")
        small = ambient.restrict(inner)
        large = ambient.restrict(outer)
        d_small = rectified_metric(small, thickness)
        d_large = rectified_metric(large, thickness)

        if x is None and y is None:
            targets = list(itertools.combinations(small.algebra.elements, 2))
        else:
            if x not in small.algebra or y not in small.algebra:
                raise InputError("x and y must lie in the inner subalgebra")
            targets = [(x, y)]

        tol = CONFIG['TOLERANCE']
        for a, b in targets:
            report.checked += 1
            lhs, rhs = d_small.d(a, b), d_large.d(a, b)
            if lhs > rhs + tol * max(1.0, rhs):
                report.violations.append((a, b, lhs, rhs))
                logger.warning(f"Monotonicity fails at ({a!r}, {b!r}): {lhs} > {rhs}")
    return report


@dataclass
class RectifiabilityReport:
    """Measured proxies for the rectifiability constant and the wall spread"""
    ratio: float = 1.0
    ratio_pair: Optional[Tuple[Label, Label]] = None
    min_ratio: float = 1.0
    spread: float = 1.0
    subalgebras: int = 0

    def to_dict(self):
        return {
            "ratio": self.ratio,
            "ratio_pair": list(self.ratio_pair) if self.ratio_pair else None,
            "min_ratio": self.min_ratio,
            "spread": self.spread,
            "subalgebras": self.subalgebras,
        }


def rectifiability_diagnostics(inst: MetricMedianAlgebraInstance, samples: int = 64,
                               seed: int = 0, generators: int = 3) -> RectifiabilityReport:
    """
    Sample finite subalgebras and report sup d_mu^M / d and the worst lambda_max / lambda_min.

    The whole algebra is always among the sampled subalgebras; the rest are
    closures of ``generators`` seeded random points.
    """
    M = inst.algebra
    rng = make_sampler(seed, stream=3)
    subsets = [frozenset(M.elements)]
    seen = set(subsets)
    if len(M) > 1:
        for _ in range(samples):
            picks = rng.choice(len(M), size=min(generators, len(M)), replace=False)
            closure = median_closure(M, M.labels_of(picks))
            if closure not in seen:
                seen.add(closure)
                subsets.append(closure)

    report = RectifiabilityReport()
    for subset in subsets:
        sub = inst.restrict(subset)
        report.subalgebras += 1
        if len(sub.algebra) == 1:
            continue
        D = sub.metric.dist
        off = ~np.eye(len(sub.algebra), dtype=bool)
        ratios = np.where(off, rectified_metric(sub).dist / np.where(off, D, 1.0), 0.0)
        i, j = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
        if ratios[i, j] > report.ratio:
            report.ratio = float(ratios[i, j])
            report.ratio_pair = (sub.algebra.elements[i], sub.algebra.elements[j])
        low = np.where(off, rectified_metric(sub, THICKNESS_MIN).dist / np.where(off, D, 1.0), np.inf)
        report.min_ratio = min(report.min_ratio, float(low.min()))
        for lam_min, lam_max in wall_thickness(sub).values():
            report.spread = max(report.spread, lam_max / lam_min)

    logger.info(f"Rectifiability over {report.subalgebras} subalgebras: "
                f"ratio {report.ratio:.6f}, spread {report.spread:.6f}")
    return report
