"""
Concrete coarse median spaces and the transport calculus between them.

A space here is a finite carrier of points (used for exhaustive or sampled
checks) together with a distance and a ternary operation defined on the
ambient points. Coordinate models accept any coordinate tuple; graph and
algebra models only their vertices.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.spatial.distance import cdist

from config import CONFIG
from models.errors import InputError
from models.median_algebra import FiniteMedianAlgebra, rank
from models.median_metrics import FiniteMetric, graph_metric
from utils.distortion import fit_two_sided
from utils.helpers import make_sampler
from utils.limits import MODE_EXHAUSTIVE, MODE_SAMPLED, resolve_mode

logger = logging.getLogger('coarsemed.coarse_models')

Point = Hashable
Triple = Tuple[Point, Point, Point]

TIE_BREAKS = ("lex", "antilex")
GEODESIC_POLICIES = ("bfs", "interval")

# sampler streams, one per kind of scan
STREAM_PARAMETERS = 11
STREAM_LIPSCHITZ = 12
STREAM_CLOSENESS = 13
STREAM_INVARIANCE = 14
STREAM_QI = 15


# ----------------------------------------------------------------------
# distances
# ----------------------------------------------------------------------
class CoordinateMetric:
    """Norm distance on coordinate tuples ('cityblock' or 'euclidean')"""

    ORDERS = {'cityblock': 1, 'euclidean': 2}

    def __init__(self, name: str):
        if name not in self.ORDERS:
            raise InputError(f"unknown coordinate metric {name!r}")
        self.name = name

    @staticmethod
    def _array(points: Sequence[Point]) -> np.ndarray:
        arr = np.asarray([tuple(p) for p in points], dtype=np.float64)
        return arr.reshape(len(points), -1)

    def pairwise(self, P: Sequence[Point], Q: Sequence[Point]) -> np.ndarray:
        return cdist(self._array(P), self._array(Q), self.name)

    def paired(self, P: Sequence[Point], Q: Sequence[Point]) -> np.ndarray:
        return np.linalg.norm(self._array(P) - self._array(Q), ord=self.ORDERS[self.name], axis=1)


class MatrixMetric:
    """Lookup distance on the points of a FiniteMetric"""

    def __init__(self, metric: FiniteMetric):
        self.metric = metric

    def _ids(self, points: Sequence[Point]) -> List[int]:
        try:
            return [self.metric.index[p] for p in points]
        except KeyError as e:
            raise InputError(f"{e.args[0]!r} is not a point of the space")

    def pairwise(self, P, Q):
        return self.metric.dist[np.ix_(self._ids(P), self._ids(Q))]

    def paired(self, P, Q):
        return self.metric.dist[self._ids(P), self._ids(Q)]


# ----------------------------------------------------------------------
# spaces
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class CoarseParameters:
    """
    Parameters (k, h) of a coarse median; h is stored as the constant h(0).

    ``one_coordinate`` is the measured defect when only one argument moves,
    and ``exhaustive`` tells whether it was measured on every tuple.
    """
    k: float
    h0: float
    one_coordinate: Optional[float] = None
    exhaustive: bool = True

    def h(self, n: int) -> float:
        return self.h0

    def to_dict(self):
        return {"k": self.k, "h0": self.h0, "one_coordinate": self.one_coordinate,
                "exhaustive": self.exhaustive}


class CoarseMedianSpace:
    """
    A carrier of points with a distance and a ternary operation.

    Args:
        name (str): Descriptor used in logs and reports
        points: Finite carrier
        metric: CoordinateMetric or MatrixMetric
        med: Ternary operation on points
        params (Optional[CoarseParameters]): Declared parameters; measured lazily when None
        declared_k (float): Multiplicative constant used when parameters are measured
        rank_bound (Optional[int]): Rank bound, None when unbounded or unknown
    """

    def __init__(self, name: str, points: Iterable[Point], metric, med: Callable[[Point, Point, Point], Point],
                 params: Optional[CoarseParameters] = None, declared_k: float = 1.0,
                 rank_bound: Optional[int] = None):
        self.name = name
        self.points: Tuple[Point, ...] = tuple(points)
        if not self.points:
            raise InputError("a coarse median space needs a non-empty carrier")
        self.metric = metric
        self._med = med
        self._params = params
        self.declared_k = params.k if params is not None else declared_k
        self.rank_bound = rank_bound

    def __repr__(self):
        return f"CoarseMedianSpace({self.name!r}, carrier={len(self.points)})"

    def __len__(self):
        return len(self.points)

    def med(self, x: Point, y: Point, z: Point) -> Point:
        return self._med(x, y, z)

    def medians(self, triples: Iterable[Triple]) -> List[Point]:
        return [self._med(x, y, z) for x, y, z in triples]

    def dist(self, x: Point, y: Point) -> float:
        return float(self.metric.paired([x], [y])[0])

    def distance_matrix(self, P: Sequence[Point], Q: Optional[Sequence[Point]] = None) -> np.ndarray:
        return self.metric.pairwise(P, P if Q is None else Q)

    def paired_distances(self, P: Sequence[Point], Q: Sequence[Point]) -> np.ndarray:
        return self.metric.paired(P, Q)

    @property
    def params(self) -> CoarseParameters:
        if self._params is None:
            self._params = measure_parameters(self, seed=0)
        return self._params


def _coordinate_median(x, y, z):
    return tuple(sorted(c)[1] for c in zip(x, y, z))


def coordinate_algebra(points: Sequence[Tuple[int, ...]]) -> FiniteMedianAlgebra:
    """
    The coordinatewise-median algebra on a med-closed set of integer points.

    Raises:
        InputError: If the points are not closed under the coordinatewise median
    """
    points = [tuple(int(c) for c in p) for p in points]
    P = np.array(points, dtype=np.int64).reshape(len(points), -1)
    lo = P.min(axis=0)
    span = P.max(axis=0) - lo + 1
    lookup = np.full(int(np.prod(span)), -1, dtype=np.int64)
    lookup[np.ravel_multi_index(tuple((P - lo).T), tuple(span))] = np.arange(len(points))

    def build():
        n = len(points)
        table = np.empty((n, n, n), dtype=np.int64)
        for x in range(n):
            A, B, C = P[x][None, None, :], P[:, None, :], P[None, :, :]
            med = np.maximum(np.minimum(A, B), np.minimum(np.maximum(A, B), C))
            table[x] = lookup[np.ravel_multi_index(tuple(np.moveaxis(med - lo, -1, 0)), tuple(span))]
        if np.any(table < 0):
            raise InputError("points are not closed under the coordinatewise median")
        return table

    def rule(x, y, z):
        return _coordinate_median(x, y, z)

    return FiniteMedianAlgebra.from_rule(points, rule, table_builder=build, kind="coordinate")


def l1_lattice_model(n: int, box: Union[int, Sequence[int]]) -> CoarseMedianSpace:
    """
    Integer points of a box in R^n with the l1 metric and coordinatewise median.

    Args:
        n (int): Dimension
        box: Side length m (coordinates 0..m-1), or one side length per coordinate
    """
    if n < 1:
        raise InputError("lattice dimension must be at least 1")
    sides = [int(box)] * n if isinstance(box, (int, np.integer)) else [int(s) for s in box]
    if len(sides) != n or any(s < 1 for s in sides):
        raise InputError(f"lattice box must give {n} positive sides")
    points = itertools.product(*(range(s) for s in sides))
    return CoarseMedianSpace(f"l1_lattice({n},{'x'.join(map(str, sides))})", points, CoordinateMetric('cityblock'),
                             _coordinate_median, params=CoarseParameters(1.0, 0.0, 0.0), rank_bound=n)


def euclidean_model(n: int, radius: float) -> CoarseMedianSpace:
    """Lattice points of the Euclidean ball of ``radius`` with the l1 median; k = sqrt(n)."""
    if n < 1 or radius < 0:
        raise InputError("euclidean model needs n >= 1 and a non-negative radius")
    r = int(math.floor(radius))
    points = [p for p in itertools.product(range(-r, r + 1), repeat=n)
              if sum(c * c for c in p) <= radius * radius]
    return CoarseMedianSpace(f"euclidean({n},{radius})", points, CoordinateMetric('euclidean'),
                             _coordinate_median, params=CoarseParameters(math.sqrt(n), 0.0, 0.0), rank_bound=n)


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def conjugate_model(model: CoarseMedianSpace, matrix: np.ndarray, round_to_lattice: bool = True) -> CoarseMedianSpace:
    """
    The median conjugated by an orthogonal map: A mu(A^-1 x, A^-1 y, A^-1 z).

    With ``round_to_lattice`` the result is rounded to the nearest integer point,
    which costs at most sqrt(n) in h(0).

    Raises:
        InputError: If ``matrix`` is not orthogonal
    """
    A = np.asarray(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.allclose(A @ A.T, np.eye(A.shape[0]), atol=1e-12):
        raise InputError("conjugating map must be orthogonal")
    inverse = A.T
    n = A.shape[0]

    def med(x, y, z):
        pulled = [tuple(inverse @ np.asarray(p, dtype=np.float64)) for p in (x, y, z)]
        image = A @ np.asarray(model.med(*pulled), dtype=np.float64)
        if round_to_lattice:
            return tuple(int(c) for c in np.rint(image))
        return tuple(float(c) for c in image)

    h0 = math.sqrt(n) if round_to_lattice else 0.0
    return CoarseMedianSpace(f"conjugate({model.name})", model.points, model.metric, med,
                             params=CoarseParameters(model.params.k, model.params.h0 + h0),
                             rank_bound=model.rank_bound)


def euclidean_rotation_gap(k_scale: float, angle: float) -> float:
    """
    ||mu(Ax, Ay, A0) - A mu(x, y, 0)||_2 for x = (k, 0), y = (0, k) and A the rotation by ``angle``.

    Raises:
        InputError: If ``k_scale`` is not positive
    """
    if not k_scale > 0:
        raise InputError("k must be positive")
    A = rotation_matrix(angle)
    x, y, origin = np.array([k_scale, 0.0]), np.array([0.0, k_scale]), np.zeros(2)
    moved = np.array(_coordinate_median(A @ x, A @ y, A @ origin))
    expected = A @ np.array(_coordinate_median(x, y, origin))
    return float(np.linalg.norm(moved - expected))


def gap_sweep(k_max: int, angle: float) -> List[Tuple[int, float]]:
    """Rotation gaps for k = 1..k_max."""
    if k_max < 1:
        raise InputError("k_max must be at least 1")
    return [(k, euclidean_rotation_gap(k, angle)) for k in range(1, k_max + 1)]


def algebra_model(M: FiniteMedianAlgebra, d: FiniteMetric,
                  params: Optional[CoarseParameters] = None) -> CoarseMedianSpace:
    """A finite median algebra with a metric, seen as a coarse median space."""
    d = d.reordered(M.elements) if d.points != M.elements else d
    return CoarseMedianSpace(f"algebra({M.kind})", M.elements, MatrixMetric(d), M.med,
                             params=params, rank_bound=rank(M))


# ----------------------------------------------------------------------
# hyperbolic graph medians
# ----------------------------------------------------------------------
def _order_key(label):
    return (type(label).__name__, label)


class GraphCoarseMedianSpace(CoarseMedianSpace):
    """
    A connected graph with its shortest-path metric and a K-center median.

    For each triple the three sides are BFS geodesics (policy 'bfs') or full
    metric intervals (policy 'interval'); the median is the vertex minimising
    the largest distance to the three sides. Ties between geodesic parents and
    between centres go to the first vertex in sorted order ('lex') or the last
    ('antilex').
    """

    def __init__(self, graph: nx.Graph, tie_break: str = "lex", geodesics: str = "bfs"):
        if tie_break not in TIE_BREAKS:
            raise InputError(f"tie_break must be one of {TIE_BREAKS}")
        if geodesics not in GEODESIC_POLICIES:
            raise InputError(f"geodesics must be one of {GEODESIC_POLICIES}")
        if graph.number_of_nodes() == 0:
            raise InputError("graph has no vertices")
        order = sorted(graph.nodes, key=_order_key)
        metric = graph_metric(graph, nodes=order)

        self.graph = graph
        self.tie_break = tie_break
        self.geodesics = geodesics
        self.D = metric.dist.astype(np.int64)
        self.adjacency = nx.to_numpy_array(graph, nodelist=order, weight=None).astype(bool)
        self._parents: Optional[np.ndarray] = None
        self._cache: Dict[Tuple[int, int, int], Tuple[int, int]] = {}
        self._quality: Optional[int] = None
        self._delta: Optional[float] = None

        params = CoarseParameters(1.0, 0.0, 0.0) if nx.is_tree(graph) else None
        super().__init__(f"graph({graph.number_of_nodes()},{tie_break},{geodesics})", order,
                         MatrixMetric(metric), self._median_label, params=params, rank_bound=1)
        self.index = metric.index

    def _pick(self, mask: np.ndarray) -> int:
        candidates = np.flatnonzero(mask)
        return int(candidates[0] if self.tie_break == "lex" else candidates[-1])

    @property
    def parents(self) -> np.ndarray:
        """parents[t, v]: the next vertex after v on the chosen geodesic towards t."""
        if self._parents is None:
            n = len(self.points)
            parents = np.empty((n, n), dtype=np.int64)
            for t in range(n):
                closer = self.adjacency & (self.D[t][None, :] == self.D[t][:, None] - 1)
                if self.tie_break == "lex":
                    parents[t] = np.argmax(closer, axis=1)
                else:
                    parents[t] = n - 1 - np.argmax(closer[:, ::-1], axis=1)
                parents[t, t] = t
            self._parents = parents
        return self._parents

    def side(self, i: int, j: int) -> np.ndarray:
        """Vertex indices of the side joining i and j."""
        if self.geodesics == "interval":
            return np.flatnonzero(self.D[i] + self.D[j] == self.D[i, j])
        a, b = min(i, j), max(i, j)
        path = [b]
        while path[-1] != a:
            path.append(int(self.parents[a, path[-1]]))
        return np.array(path, dtype=np.int64)

    def center(self, i: int, j: int, k: int) -> Tuple[int, int]:
        """(centre index, K) for the triangle on i, j, k."""
        key = tuple(sorted((i, j, k)))
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        a, b, c = key
        if a == b or b == c:
            result = (b, 0)
        else:
            reach = np.maximum.reduce([self.D[:, self.side(p, q)].min(axis=1)
                                       for p, q in ((a, b), (b, c), (a, c))])
            best = int(reach.min())
            result = (self._pick(reach == best), best)
        self._cache[key] = result
        return result

    def _median_label(self, x, y, z):
        try:
            i, j, k = self.index[x], self.index[y], self.index[z]
        except KeyError as e:
            raise InputError(f"{e.args[0]!r} is not a vertex of the graph")
        return self.points[self.center(i, j, k)[0]]

    def center_quality(self) -> int:
        """K(graph): the worst centre quality over all triangles."""
        if self._quality is None:
            n = len(self.points)
            self._quality = max((self.center(i, j, k)[1]
                                 for i, j, k in itertools.combinations(range(n), 3)), default=0)
            logger.info(f"Centre quality of {self.name}: K = {self._quality}")
        return self._quality


    def gromov_delta(self) -> float:
        """Exact four-point delta: half the gap between the two largest pair sums, maximised."""
        if self._delta is None:
            D = self.D
            delta = 0
            for x in range(len(self.points)):
                sums = np.stack([
                    D[x][:, None, None] + D[None, :, :],
                    D[x][None, :, None] + D[:, None, :],
                    D[x][None, None, :] + D[:, :, None],
                ])
                ordered = np.sort(sums, axis=0)
                delta = max(delta, int((ordered[2] - ordered[1]).max()))
            self._delta = delta / 2
            logger.info(f"Four-point delta of {self.name}: {self._delta}")
        return self._delta


def graph_model(graph: nx.Graph, tie_break: str = "lex", geodesics: str = "bfs") -> GraphCoarseMedianSpace:
    """
    The hyperbolic K-center median on a connected finite graph.

    Raises:
        InputError: If the graph is empty or disconnected, or a policy is unknown
    """
    return GraphCoarseMedianSpace(graph, tie_break=tie_break, geodesics=geodesics)


# ----------------------------------------------------------------------
# measurements
# ----------------------------------------------------------------------
def _sample_indices(n: int, count: int, width: int, seed: int, stream: int) -> np.ndarray:
    return make_sampler(seed, stream).integers(0, n, size=(count, width))


def measure_parameters(space: CoarseMedianSpace, mode: Optional[str] = None,
                       samples: Optional[int] = None, seed: Optional[int] = None) -> CoarseParameters:
    """
    Measure h(0) for the declared k through the one-coordinate defect.

    h1 = sup d(mu(x,y,z), mu(x',y,z)) - k d(x,x'); moving the three arguments
    one at a time gives condition (i) with h(0) = 3 * h1 for symmetric medians.

    Returns:
        CoarseParameters: (k, 3 * h1), exact when every quadruple was evaluated
    """
    points = space.points
    n = len(points)
    mode = resolve_mode(mode, n, CONFIG['LIPSCHITZ_EXHAUSTIVE_CAP'], seed)
    k = space.declared_k
    worst = 0.0

    if mode == MODE_EXHAUSTIVE:
        D = space.distance_matrix(points)
        for y, z in itertools.product(points, repeat=2):
            images = space.medians((x, y, z) for x in points)
            excess = space.distance_matrix(images) - k * D
            worst = max(worst, float(excess.max()))
        checked = n ** 4
    else:
        count = samples or CONFIG['DEFAULT_SAMPLES']
        quads = _sample_indices(n, count, 4, seed, STREAM_PARAMETERS)
        first = space.medians((points[a], points[c], points[d]) for a, b, c, d in quads)
        second = space.medians((points[b], points[c], points[d]) for a, b, c, d in quads)
        moved = space.paired_distances([points[a] for a in quads[:, 0]], [points[b] for b in quads[:, 1]])
        excess = space.paired_distances(first, second) - k * moved
        worst = max(worst, float(excess.max()))
        checked = count

    worst = 0.0 if worst <= CONFIG['TOLERANCE'] else worst
    logger.info(f"Measured parameters of {space.name}: k={k}, one-coordinate defect {worst} "
                f"({mode}, {checked} quadruples)")
    return CoarseParameters(k, 3 * worst, worst, exhaustive=mode == MODE_EXHAUSTIVE)


@dataclass
class LipschitzReport:
    """Outcome of check_lipschitz; ``excess`` is the largest left-minus-right gap seen"""
    ok: bool
    excess: float
    exhaustive: bool
    checked: int
    witness: Optional[Tuple[Triple, Triple]] = None

    def to_dict(self):
        return {"ok": self.ok, "excess": self.excess, "exhaustive": self.exhaustive,
                "checked": self.checked,
                "witness": [list(t) for t in self.witness] if self.witness else None}


def check_lipschitz(space: CoarseMedianSpace, k: Optional[float] = None, h0: Optional[float] = None,
                    mode: Optional[str] = None, samples: Optional[int] = None,
                    seed: Optional[int] = None) -> LipschitzReport:
    """
    Test d(mu(x,y,z), mu(x',y',z')) <= k (d(x,x') + d(y,y') + d(z,z')) + h(0).

    The exhaustive scan walks unordered triples and matches arguments in the
    cheapest of the six orders, which is equivalent for symmetric medians.
    """
    params = space.params if k is None or h0 is None else None
    k = params.k if k is None else k
    h0 = params.h0 if h0 is None else h0
    points = space.points
    n = len(points)
    mode = resolve_mode(mode, n, CONFIG['LIPSCHITZ_EXHAUSTIVE_CAP'], seed)
    tol = CONFIG['TOLERANCE']
    worst, witness = -math.inf, None

    if mode == MODE_EXHAUSTIVE:
        D = space.distance_matrix(points)
        triples = np.array(list(itertools.combinations_with_replacement(range(n), 3)), dtype=np.int64)
        images = space.medians(tuple(points[i] for i in t) for t in triples)
        for row, (a, b, c) in enumerate(triples):
            moved = np.min([D[p, triples[:, 0]] + D[q, triples[:, 1]] + D[r, triples[:, 2]]
                            for p, q, r in itertools.permutations((a, b, c))], axis=0)
            gap = space.distance_matrix([images[row]], images)[0] - (k * moved + h0)
            other = int(np.argmax(gap))
            if gap[other] > worst:
                worst = float(gap[other])
                witness = (tuple(points[i] for i in (a, b, c)), tuple(points[i] for i in triples[other]))
        checked = len(triples) ** 2
    else:
        count = samples or CONFIG['DEFAULT_SAMPLES']
        rows = _sample_indices(n, count, 6, seed, STREAM_LIPSCHITZ)
        left = [tuple(points[i] for i in r[:3]) for r in rows]
        right = [tuple(points[i] for i in r[3:]) for r in rows]
        moved = sum(space.paired_distances([t[c] for t in left], [t[c] for t in right]) for c in range(3))
        gap = space.paired_distances(space.medians(left), space.medians(right)) - (k * moved + h0)
        other = int(np.argmax(gap))
        worst, witness = float(gap[other]), (left[other], right[other])
        checked = count

    ok = worst <= tol * max(1.0, h0)
    if not ok:
        logger.warning(f"Condition (i) fails on {space.name} with k={k}, h0={h0}: excess {worst}")
    return LipschitzReport(ok, max(worst, 0.0) if ok else worst, mode == MODE_EXHAUSTIVE, checked,
                           None if ok else witness)


@dataclass
class ClosenessEstimate:
    """Observed sup of a pointwise distance between two ternary operations"""
    sup_observed: float
    exhaustive: bool
    sample_count: int
    seed: Optional[int] = None
    witness: Optional[Triple] = None

    def to_dict(self):
        return {"sup": self.sup_observed, "exhaustive": self.exhaustive,
                "sample_count": self.sample_count, "seed": self.seed,
                "witness": list(self.witness) if self.witness else None}


def _triples_for(points: Sequence[Point], mode: str, samples: Optional[int], seed: Optional[int],
                 stream: int, extra_triples: Iterable[Triple]) -> Tuple[List[Triple], int]:
    if mode == MODE_EXHAUSTIVE:
        triples = list(itertools.product(points, repeat=3))
    else:
        count = samples or CONFIG['DEFAULT_SAMPLES']
        rows = _sample_indices(len(points), count, 3, seed, stream)
        triples = [tuple(points[i] for i in r) for r in rows]
    sampled = len(triples)
    triples.extend(tuple(t) for t in extra_triples)
    return triples, sampled


def _same_carrier(a: CoarseMedianSpace, b: CoarseMedianSpace) -> bool:
    return len(a.points) == len(b.points) and set(a.points) == set(b.points)


def closeness_distance(mu1: CoarseMedianSpace, mu2: CoarseMedianSpace, mode: Optional[str] = None,
                       samples: Optional[int] = None, seed: Optional[int] = None,
                       extra_triples: Iterable[Triple] = ()) -> ClosenessEstimate:
    """
    sup over triples of d(mu1(t), mu2(t)), measured with mu1's distance.

    Args:
        mu1, mu2 (CoarseMedianSpace): Operations on the same carrier
        mode (Optional[str]): 'exhaustive', 'sampled' or None for automatic
        samples (Optional[int]): Sample count in sampled mode
        seed (Optional[int]): Sampler seed, required in sampled mode
        extra_triples: Extra triples always evaluated

    Raises:
        InputError: If the carriers differ
    """
    if not _same_carrier(mu1, mu2):
        raise InputError("closeness needs two operations on the same carrier")
    mode = resolve_mode(mode, len(mu1.points), CONFIG['EXHAUSTIVE_CAP'], seed)
    triples, sampled = _triples_for(mu1.points, mode, samples, seed, STREAM_CLOSENESS, extra_triples)
    gaps = mu1.paired_distances(mu1.medians(triples), mu2.medians(triples))
    worst = int(np.argmax(gaps))
    estimate = ClosenessEstimate(float(gaps[worst]), mode == MODE_EXHAUSTIVE, sampled,
                                 seed if mode == MODE_SAMPLED else None, triples[worst])
    logger.info(f"Closeness of {mu1.name} and {mu2.name}: {estimate.sup_observed} ({mode})")
    return estimate


# ----------------------------------------------------------------------
# transformations and quasi-isometries
# ----------------------------------------------------------------------
def affine_map(matrix, offset=None) -> Callable[[Point], Point]:
    """x -> A x + b on coordinate tuples; integer data stays integral."""
    A = np.asarray(matrix)
    b = np.zeros(A.shape[0], dtype=A.dtype) if offset is None else np.asarray(offset)
    integral = np.issubdtype(A.dtype, np.integer) and np.issubdtype(b.dtype, np.integer)

    def apply(point):
        image = A @ np.asarray(point) + b
        return tuple(int(c) for c in image) if integral else tuple(float(c) for c in image)

    return apply


def permutation_map(space: CoarseMedianSpace, perm: Sequence[int]) -> Callable[[Point], Point]:
    """points[i] -> points[perm[i]] on a finite carrier."""
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(space.points))):
        raise InputError("permutation array must be a permutation of the carrier indices")
    table = {space.points[i]: space.points[p] for i, p in enumerate(perm)}

    def apply(point):
        try:
            return table[point]
        except KeyError:
            raise InputError(f"{point!r} is not in the carrier")

    return apply


def _sample_points(space: CoarseMedianSpace, cap: int, seed: int, stream: int) -> List[Point]:
    points = space.points
    if len(points) <= cap:
        return list(points)
    picks = make_sampler(seed, stream).choice(len(points), size=cap, replace=False)
    return [points[i] for i in sorted(picks)]


def invariance_defect(model: CoarseMedianSpace, transformations: Sequence[Callable[[Point], Point]],
                      mode: Optional[str] = None, samples: Optional[int] = None,
                      seed: Optional[int] = None, extra_triples: Iterable[Triple] = ()) -> ClosenessEstimate:
    """
    sup over (g, triple) of d(mu(gx, gy, gz), g mu(x, y, z)).

    Raises:
        InputError: If some transformation is not an isometry on the carrier
    """
    mode = resolve_mode(mode, len(model.points), CONFIG['EXHAUSTIVE_CAP'], seed)
    sample_points = _sample_points(model, CONFIG['EXHAUSTIVE_CAP'] * 4, seed or 0, STREAM_INVARIANCE)
    before = model.distance_matrix(sample_points)
    tol = CONFIG['TOLERANCE']
    for number, g in enumerate(transformations):
        after = model.distance_matrix([g(p) for p in sample_points])
        if np.any(np.abs(after - before) > tol * np.maximum(1.0, before)):
            raise InputError(f"transformation {number} is not an isometry of the carrier")

    triples, sampled = _triples_for(model.points, mode, samples, seed, STREAM_INVARIANCE, extra_triples)
    worst, witness = 0.0, None
    for g in transformations:
        moved = model.medians(tuple(g(p) for p in t) for t in triples)
        images = [g(m) for m in model.medians(triples)]
        gaps = model.paired_distances(moved, images)
        top = int(np.argmax(gaps))
        if witness is None or gaps[top] > worst:
            worst, witness = float(gaps[top]), triples[top]
    return ClosenessEstimate(worst, mode == MODE_EXHAUSTIVE, sampled,
                             seed if mode == MODE_SAMPLED else None, witness)


class QuasiIsometryPair:
    """
    A map f: X -> Y with a quasi-inverse g: Y -> X, constants measured on the carriers.

    ``multiplicative`` and ``additive`` are the worst (alpha, epsilon) of f and g;
    ``roundtrip_source`` is sup d(g f x, x) and ``roundtrip_target`` sup d(f g y, y).
    """

    def __init__(self, source: CoarseMedianSpace, target: CoarseMedianSpace,
                 forward: Callable[[Point], Point], backward: Callable[[Point], Point]):
        self.source = source
        self.target = target
        self.forward = forward
        self.backward = backward

        xs = _sample_points(source, CONFIG['EXHAUSTIVE_CAP'] * 8, 0, STREAM_QI)
        ys = _sample_points(target, CONFIG['EXHAUSTIVE_CAP'] * 8, 0, STREAM_QI)
        fx = [forward(x) for x in xs]
        gy = [backward(y) for y in ys]
        alpha_f, eps_f = fit_two_sided(source.distance_matrix(xs), target.distance_matrix(fx))
        alpha_g, eps_g = fit_two_sided(target.distance_matrix(ys), source.distance_matrix(gy))
        self.roundtrip_source = float(source.paired_distances([backward(p) for p in fx], xs).max())
        self.roundtrip_target = float(target.paired_distances([forward(p) for p in gy], ys).max())
        self.multiplicative = max(alpha_f, alpha_g)
        self.additive = max(eps_f, eps_g, self.roundtrip_source, self.roundtrip_target)
        logger.debug(f"Quasi-isometry {source.name} -> {target.name}: "
                     f"({self.multiplicative}, {self.additive})")

    @classmethod
    def from_maps(cls, source: CoarseMedianSpace, target: CoarseMedianSpace,
                  forward: Mapping[Point, Point], backward: Mapping[Point, Point]) -> "QuasiIsometryPair":
        def lookup(table, side):
            def apply(point):
                try:
                    return table[point]
                except KeyError:
                    raise InputError(f"{point!r} has no image under the {side} map")
            return apply
        return cls(source, target, lookup(dict(forward), "forward"), lookup(dict(backward), "backward"))

    @classmethod
    def identity(cls, space: CoarseMedianSpace) -> "QuasiIsometryPair":
        return cls(space, space, lambda p: p, lambda p: p)

    def inverse(self) -> "QuasiIsometryPair":
        """g with quasi-inverse f; pushing along it is pulling along self."""
        return QuasiIsometryPair(self.target, self.source, self.backward, self.forward)

    def compose(self, other: "QuasiIsometryPair") -> "QuasiIsometryPair":
        """other after self: X -> Y -> Z."""
        f1, g1, f2, g2 = self.forward, self.backward, other.forward, other.backward
        return QuasiIsometryPair(self.source, other.target, lambda x: f2(f1(x)), lambda z: g1(g2(z)))

    def to_dict(self):
        return {"source": self.source.name, "target": self.target.name,
                "multiplicative": self.multiplicative, "additive": self.additive,
                "roundtrip_source": self.roundtrip_source, "roundtrip_target": self.roundtrip_target}


def pushforward(qi: QuasiIsometryPair, mu_X: CoarseMedianSpace) -> CoarseMedianSpace:
    """
    f o mu_X o (g x g x g) on Y; parameters are re-measured on first use.

    Raises:
        InputError: If mu_X does not live on the source carrier
    """
    if not _same_carrier(mu_X, qi.source):
        raise InputError("pushforward needs a median on the source carrier")
    f, g = qi.forward, qi.backward
    return CoarseMedianSpace(f"push({mu_X.name})", qi.target.points, qi.target.metric,
                             lambda a, b, c: f(mu_X.med(g(a), g(b), g(c))),
                             declared_k=mu_X.declared_k * qi.multiplicative ** 2,
                             rank_bound=mu_X.rank_bound)


def pullback(qi: QuasiIsometryPair, mu_Y: CoarseMedianSpace) -> CoarseMedianSpace:
    """
    g o mu_Y o (f x f x f) on X; parameters are re-measured on first use.

    Raises:
        InputError: If mu_Y does not live on the target carrier
    """
    if not _same_carrier(mu_Y, qi.target):
        raise InputError("pullback needs a median on the target carrier")
    f, g = qi.forward, qi.backward
    return CoarseMedianSpace(f"pull({mu_Y.name})", qi.source.points, qi.source.metric,
                             lambda x, y, z: g(mu_Y.med(f(x), f(y), f(z))),
                             declared_k=mu_Y.declared_k * qi.multiplicative ** 2,
                             rank_bound=mu_Y.rank_bound)


def transport_roundtrip_bound(qi: QuasiIsometryPair, mu_X: CoarseMedianSpace) -> float:
    """
    Bound on the closeness of pullback(qi, pushforward(qi, mu_X)) to mu_X.

    Each argument moves by at most r = sup d(g f x, x) and so does the output,
    giving (3k + 1) r + h(0).
    """
    params = mu_X.params
    return (3 * params.k + 1) * qi.roundtrip_source + params.h0
