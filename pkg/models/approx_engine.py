"""
Approximating finite subsets of coarse median spaces by finite median metric spaces.

A resolver produces (M, lambda, pi) for a subset A; the pipeline optionally
exactifies it so lambda(pi(a)) = a, assigns wall lengths from edge images,
and measures how far lambda: (M, d_l) -> model is from an isometric embedding.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import CONFIG
from models.coarse_models import CoarseMedianSpace, GraphCoarseMedianSpace, coordinate_algebra
from models.cube_complex import CubeComplexSkeleton, one_skeleton, parallel_classes, product, tree_algebra
from models.errors import (APrioriBoundError, ApproximationError, CapExceededError, ConsistencyError,
                           InputError)
from models.median_algebra import FiniteMedianAlgebra, Label, rank
from models.median_metrics import WallWeighting, verify_median_metric_for, wall_metric
from utils.distortion import fit_one_sided, fit_two_sided
from utils.helpers import format_label, make_sampler

logger = logging.getLogger('coarsemed.approx_engine')

Point = Hashable
ZERO_LENGTH_FACTOR = 1e-6
HEIGHT_DIGITS = 9
STREAM_GEODESICS = 21


@dataclass
class ResolverOutput:
    """(M, lambda, pi) with the quasi-morphism constant L of lambda"""
    algebra: FiniteMedianAlgebra
    embedding: Dict[Label, Point]
    projection: Dict[Point, Label]
    bound: float
    exactified: bool = False
    tight_bound: Optional[float] = None
    chained_bound: Optional[float] = None

    def covers(self, A: Sequence[Point]) -> bool:
        return all(self.embedding[self.projection[a]] == a for a in A)


@dataclass(frozen=True)
class Resolver:
    name: str
    produce: Callable[[CoarseMedianSpace, Sequence[Point]], ResolverOutput]


def _dedupe(A: Sequence[Point]) -> List[Point]:
    seen, ordered = set(), []
    for a in A:
        a = tuple(a) if isinstance(a, list) else a
        if a not in seen:
            seen.add(a)
            ordered.append(a)
    return ordered


def quasimorphism_defect(M: FiniteMedianAlgebra, embedding: Dict[Label, Point], model: CoarseMedianSpace) -> float:
    """sup over triples of d(lambda(med(u, v, w)), mu(lambda u, lambda v, lambda w))."""
    images = [embedding[m] for m in M.elements]
    triples = list(itertools.combinations_with_replacement(range(len(M)), 3))
    if not triples:
        return 0.0
    image_of_median = [images[M.med_index(i, j, k)] for i, j, k in triples]
    median_of_images = model.medians((images[i], images[j], images[k]) for i, j, k in triples)
    return float(model.paired_distances(image_of_median, median_of_images).max())


# ----------------------------------------------------------------------
# resolvers
# ----------------------------------------------------------------------
def _coordinate_closure(points: List[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
    members = {tuple(int(c) for c in p) for p in points}
    while True:
        P = np.array(sorted(members), dtype=np.int64)
        produced = set()
        for x in range(len(P)):
            A, B, C = P[x][None, None, :], P[:, None, :], P[None, :, :]
            med = np.maximum(np.minimum(A, B), np.minimum(np.maximum(A, B), C))
            produced.update(map(tuple, np.unique(med.reshape(-1, P.shape[1]), axis=0).tolist()))
        new = produced - members
        if not new:
            return sorted(members)
        members |= new


def lattice_resolver(model: CoarseMedianSpace, A: Sequence[Point]) -> ResolverOutput:
    """
    M = median closure of A in the lattice, lambda the inclusion, pi the identity, L = 0.

    Raises:
        InputError: If A leaves the model's box
        CapExceededError: If the closure is larger than ``TABLE_CAP``
        ConsistencyError: If the closure breaks the 2^(2^|A|) bound
    """
    A = _dedupe(A)
    carrier = set(model.points)
    outside = [a for a in A if a not in carrier]
    if outside:
        raise InputError(f"{outside[0]!r} is not a point of {model.name}")
    closure = _coordinate_closure(A)
    if len(closure) > 2 ** (2 ** len(A)):
        raise ConsistencyError(f"closure of {len(A)} points has {len(closure)} elements", witness=tuple(A))
    if len(closure) > CONFIG['TABLE_CAP']:
        raise CapExceededError(f"closure has {len(closure)} elements, cap is {CONFIG['TABLE_CAP']}")

    M = coordinate_algebra(closure)
    logger.info(f"Lattice closure of {len(A)} points has {len(M)} elements")
    return ResolverOutput(M, {m: m for m in M.elements}, {a: a for a in A}, 0.0)


class _RootedTree:
    """Weighted rooted tree grown by attaching points at given heights"""

    def __init__(self, root: str):
        self.graph = nx.Graph()
        self.graph.add_node(root)
        self.order = [root]
        self.height = {root: 0.0}
        self.parent: Dict[str, Optional[str]] = {root: None}
        self.steiner = 0

    def attach(self, node: str, parent: str, height: float):
        self.graph.add_edge(parent, node, length=height - self.height[parent])
        self.order.append(node)
        self.height[node] = height
        self.parent[node] = parent

    def locate(self, start: str, height: float) -> str:
        """The node at ``height`` on the path from ``start`` to the root, splicing one in if needed."""
        v = start
        while self.height[v] > height:
            p = self.parent[v]
            if self.height[p] >= height:
                v = p
                continue
            node = f"s:{self.steiner}"
            self.steiner += 1
            self.graph.remove_edge(p, v)
            self.attach(node, p, height)
            self.graph.add_edge(node, v, length=self.height[v] - height)
            self.parent[v] = node
            return node
        return v

    def relabel(self, old: str, new: str):
        nx.relabel_nodes(self.graph, {old: new}, copy=False)
        self.order[self.order.index(old)] = new
        self.height[new] = self.height.pop(old)
        self.parent[new] = self.parent.pop(old)
        for child, parent in self.parent.items():
            if parent == old:
                self.parent[child] = new


def tree_resolver(model: CoarseMedianSpace, A: Sequence[Point], w: Optional[Point] = None) -> ResolverOutput:
    """
    Approximate A in a graph by a finite tree built from bottleneck Gromov products at ``w``.

    (x|y)' is the widest-path value between x and y on the complete graph over A
    weighted by Gromov products at w; d_T(x, y) = d(x, w) + d(y, w) - 2 (x|y)'.
    The tree is grown from w by attaching each point at its branch height,
    with Steiner nodes spliced into edges where needed.

    Args:
        model (CoarseMedianSpace): A graph model
        A: Graph vertices
        w: Basepoint, the first point of A by default

    Raises:
        InputError: If the model is not a graph model, or w is not in A
    """
    if not isinstance(model, GraphCoarseMedianSpace):
        raise InputError("the tree resolver needs a graph model")
    A = _dedupe(A)
    w = A[0] if w is None else w
    if w not in A:
        raise InputError(f"basepoint {w!r} must belong to A")
    A.remove(w)
    A.insert(0, w)

    D = model.distance_matrix(A)
    heights = D[:, 0]
    gromov = (heights[:, None] + heights[None, :] - D) / 2

    complete = nx.Graph()
    complete.add_nodes_from(range(len(A)))
    complete.add_weighted_edges_from((i, j, gromov[i, j]) for i, j in itertools.combinations(range(len(A)), 2))
    spanning = nx.maximum_spanning_tree(complete)
    widest = np.diag(heights).astype(np.float64)
    for i, j in itertools.combinations(range(len(A)), 2):
        path = nx.shortest_path(spanning, i, j)
        widest[i, j] = widest[j, i] = min(gromov[a, b] for a, b in zip(path, path[1:]))

    tree = _RootedTree(f"a:{format_label(w)}")
    node_of = {0: tree.order[0]}
    for i in range(1, len(A)):
        anchor = max(range(i), key=lambda j: (widest[i, j], -j))
        branch = round(min(widest[i, anchor], heights[i]), HEIGHT_DIGITS)
        at = tree.locate(node_of[anchor], branch)
        label = f"a:{format_label(A[i])}"
        top = round(float(heights[i]), HEIGHT_DIGITS)
        if top == branch and at.startswith("s:"):
            tree.relabel(at, label)
        else:
            tree.attach(label, at, top if top > branch else branch)
        node_of[i] = label

    nodes = tree.order
    tree_lengths = {v: nx.single_source_dijkstra_path_length(tree.graph, v, weight='length') for v in nodes}
    M = tree_algebra(nodes, list(tree.graph.edges))

    to_A = model.distance_matrix(model.points, A)
    embedding = {}
    for v in nodes:
        target = np.array([tree_lengths[v][node_of[i]] for i in range(len(A))])
        score = np.abs(to_A - target[None, :]).max(axis=1)
        embedding[v] = model.points[int(np.argmin(score))]
    projection = {A[i]: node_of[i] for i in range(len(A))}

    missed = max(model.dist(a, embedding[projection[a]]) for a in A)
    bound = max(quasimorphism_defect(M, embedding, model), missed)
    logger.info(f"Tree resolver: {len(A)} points, {len(nodes)} tree nodes, bound {bound}")
    return ResolverOutput(M, embedding, projection, bound)


LATTICE_RESOLVER = Resolver("lattice", lattice_resolver)


def make_tree_resolver(w: Optional[Point] = None) -> Resolver:
    return Resolver("tree", lambda model, A: tree_resolver(model, A, w))


def exactify(output: ResolverOutput, A: Sequence[Point], model: CoarseMedianSpace) -> ResolverOutput:
    """
    Product with a path tree on A so that lambda'(pi'(a)) = a exactly.

    lambda'(y, a) = a when y = pi(a), else lambda(y); pi'(a) = (pi(a), a).
    Reports the bound (k + 2) L + h(0) and enforces the chained bound (3k + 2) L + h(0).

    Raises:
        ConsistencyError: If the measured defect exceeds the chained bound
    """
    A = _dedupe(A)
    path = tree_algebra(A, list(zip(A, A[1:])))
    M = product(output.algebra, path)
    embedding = {}
    for y, a in M.elements:
        embedding[(y, a)] = a if output.projection[a] == y else output.embedding[y]
    projection = {a: (output.projection[a], a) for a in A}

    params = model.params
    L = output.bound
    tight = (params.k + 2) * L + params.h0
    chained = (3 * params.k + 2) * L + params.h0
    measured = quasimorphism_defect(M, embedding, model)
    if measured > chained + CONFIG['TOLERANCE'] * max(1.0, chained):
        raise ConsistencyError(f"exactified defect {measured} exceeds (3k+2)L+h(0) = {chained}")
    if measured > tight + CONFIG['TOLERANCE'] * max(1.0, tight):
        logger.warning(f"Exactified defect {measured} exceeds the tight bound (k+2)L+h(0) = {tight} "
                       f"(chained bound (3k+2)L+h(0) = {chained} holds)")

    logger.info(f"Exactified: |M'| = {len(M)}, defect {measured}")
    return ResolverOutput(M, embedding, projection, measured, exactified=True,
                          tight_bound=tight, chained_bound=chained)


# ----------------------------------------------------------------------
# wall lengths and distortion
# ----------------------------------------------------------------------
@dataclass
class WallLengths:
    """Chosen wall lengths plus per-wall (min, max) over all crossing edges"""
    weighting: WallWeighting
    lengths: List[float]
    spread: List[Tuple[float, float]]
    replaced: List[int] = field(default_factory=list)


def _edge_images(classes, embedding, model):
    return [model.paired_distances([embedding[a] for a, _ in edges], [embedding[b] for _, b in edges])
            for edges in classes.values()]


def assign_wall_lengths(M: FiniteMedianAlgebra, embedding: Dict[Label, Point], model: CoarseMedianSpace,
                        skeleton: Optional[CubeComplexSkeleton] = None) -> WallLengths:
    """
    l(W) = model distance between the images of the first edge crossing W.

    Zero lengths are replaced by the smallest positive length times 1e-6.

    Raises:
        ApproximationError: If every edge image is degenerate
    """
    skeleton = skeleton or one_skeleton(M)
    classes = parallel_classes(skeleton)
    images = _edge_images(classes, embedding, model)
    lengths = [float(values[0]) for values in images]
    spread = [(float(values.min()), float(values.max())) for values in images]

    replaced = [w for w, length in enumerate(lengths) if length <= 0]
    if replaced:
        positive = [length for length in lengths if length > 0]
        if not positive:
            raise ApproximationError("λ collapses M: every wall has length zero")
        floor = min(positive) * ZERO_LENGTH_FACTOR
        for w in replaced:
            lengths[w] = floor
        logger.warning(f"Replaced {len(replaced)} zero wall lengths by {floor}")

    weighting = WallWeighting(dict(zip(skeleton.walls, lengths)))
    return WallLengths(weighting, lengths, spread, replaced)


def parallel_edge_constants(M: FiniteMedianAlgebra, embedding: Dict[Label, Point], model: CoarseMedianSpace,
                            bound: Optional[float] = None,
                            skeleton: Optional[CubeComplexSkeleton] = None) -> Tuple[float, float]:
    """
    Smallest (beta, gamma) with d(f e2) <= beta d(f e1) + gamma over parallel edge pairs.

    With ``bound`` = L given, also checks d(f e2) <= k d(f e1) + h(0) + 2L.

    Raises:
        APrioriBoundError: If a parallel pair breaks the a-priori bound
    """
    skeleton = skeleton or one_skeleton(M)
    classes = parallel_classes(skeleton)
    sources, targets = [], []
    for (wall, edges), values in zip(classes.items(), _edge_images(classes, embedding, model)):
        if len(values) < 2:
            continue
        first, second = np.meshgrid(np.arange(len(values)), np.arange(len(values)), indexing='ij')
        keep = first != second
        s, t = values[first[keep]], values[second[keep]]
        if bound is not None:
            params = model.params
            limit = params.k * s + params.h0 + 2 * bound
            over = np.flatnonzero(t > limit + CONFIG['TOLERANCE'] * np.maximum(1.0, limit))
            if len(over):
                pick = over[0]
                e1, e2 = edges[first[keep][pick]], edges[second[keep][pick]]
                logger.error(f"Parallel edges {e1} and {e2} break the a-priori bound: {t[pick]} > {limit[pick]}")
                raise APrioriBoundError("parallel edge images break k d + h(0) + 2L", witness=(e1, e2))
        sources.append(s)
        targets.append(t)

    if not sources:
        return 1.0, 0.0
    return fit_one_sided(np.concatenate(sources), np.concatenate(targets))


def check_geodesics(M: FiniteMedianAlgebra, skeleton: CubeComplexSkeleton, embedding: Dict[Label, Point],
                    model: CoarseMedianSpace, beta: float, gamma: float, seed: int = 0) -> int:
    """
    Check d(f x_i, f x_i+1) <= beta d(f x_0, f x_m) + gamma along skeleton geodesics.

    All endpoint pairs are used when there are at most ``DEFAULT_SAMPLES`` of them,
    otherwise a seeded sample.

    Returns:
        int: Number of geodesics checked

    Raises:
        APrioriBoundError: On the first violating step
    """
    graph = skeleton.to_networkx()
    pairs = list(itertools.combinations(range(len(M)), 2))
    if len(pairs) > CONFIG['DEFAULT_SAMPLES']:
        picks = make_sampler(seed, STREAM_GEODESICS).choice(len(pairs), size=CONFIG['DEFAULT_SAMPLES'], replace=False)
        pairs = [pairs[p] for p in sorted(picks)]

    tol = CONFIG['TOLERANCE']
    for i, j in pairs:
        path = nx.shortest_path(graph, M.elements[i], M.elements[j])
        images = [embedding[v] for v in path]
        reach = model.dist(images[0], images[-1])
        steps = model.paired_distances(images[:-1], images[1:])
        limit = beta * reach + gamma
        if np.any(steps > limit + tol * max(1.0, limit)):
            raise APrioriBoundError("a geodesic step breaks the combinatorial-geodesic bound",
                                    witness=(M.elements[i], M.elements[j]))
    return len(pairs)


@dataclass
class ApproximationReport:
    """Outcome of one approximation run"""
    resolver: str
    algebra: FiniteMedianAlgebra
    skeleton: CubeComplexSkeleton
    lengths: WallLengths
    embedding: Dict[Label, Point]
    alpha: float
    epsilon: float
    beta: float
    gamma: float
    covered: bool
    bound: float
    apriori: Tuple[float, float]
    envelope: Dict[str, float]
    exactified: bool = False
    tight_bound: Optional[float] = None
    chained_bound: Optional[float] = None
    geodesics_checked: int = 0

    def to_dict(self):
        return {
            "resolver": self.resolver,
            "M": self.skeleton.to_dict(),
            "rank": rank(self.algebra),
            "embedding": [[m, self.embedding[m]] for m in self.algebra.elements],
            "lengths": {str(w): length for w, length in enumerate(self.lengths.lengths)},
            "spread": {str(w): list(pair) for w, pair in enumerate(self.lengths.spread)},
            "replaced": self.lengths.replaced,
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "beta": self.beta,
            "gamma": self.gamma,
            "covered": self.covered,
            "quasimorphism_bound": self.bound,
            "apriori": {"beta": self.apriori[0], "gamma": self.apriori[1]},
            "envelope": self.envelope,
            "exactified": self.exactified,
            "bounds": {"tight": self.tight_bound, "chained": self.chained_bound},
            "geodesics_checked": self.geodesics_checked,
        }


def _check_envelope(M, d_l, image_dist, beta, gamma, slack):
    n = len(M)
    upper = beta * d_l + n * gamma
    lower = n * beta ** 2 * image_dist + 2 * n * beta * gamma
    tol = CONFIG['TOLERANCE']
    bad = np.argwhere((image_dist > upper + tol * np.maximum(1.0, upper))
                      | (d_l > lower + slack + tol * np.maximum(1.0, lower)))
    if len(bad):
        i, j = bad[0]
        raise APrioriBoundError("pair leaves the quasi-isometric envelope",
                                witness=tuple(M.labels_of((i, j))))
    return {"multiplicative_upper": beta, "additive_upper": n * gamma,
            "multiplicative_lower": n * beta ** 2, "additive_lower": 2 * n * beta * gamma}


def approximate(A: Sequence[Point], model: CoarseMedianSpace, resolver: Resolver,
                exactify_output: Optional[bool] = None, seed: int = 0) -> ApproximationReport:
    """
    Run resolver, optional exactification, wall lengths and distortion measurement.

    Args:
        A: Finite non-empty subset of the model
        model (CoarseMedianSpace): Ambient coarse median space
        resolver (Resolver): Produces (M, lambda, pi)
        exactify_output (Optional[bool]): Force exactification on or off; by default
            it runs only when lambda o pi is not the inclusion
        seed (int): Seed for sampled geodesic checks

    Raises:
        InputError: If A is empty
        ApproximationError: If A is not covered and exactification is off
        ConsistencyError: If (M, d_l) fails to be a median metric for M's median
        APrioriBoundError: If a measured quantity breaks an a-priori bound
    """
    A = _dedupe(A)
    if not A:
        raise InputError("A must be non-empty")

    output = resolver.produce(model, A)
    covered = output.covers(A)
    run_exactify = (not covered) if exactify_output is None else exactify_output
    if not run_exactify and not covered:
        raise ApproximationError("λ∘π is not the inclusion of A and exactification is off")
    if run_exactify:
        output = exactify(output, A, model)
        covered = output.covers(A)
        if not covered:
            raise ApproximationError("exactified output does not cover A")

    M = output.algebra
    skeleton = one_skeleton(M)
    lengths = assign_wall_lengths(M, output.embedding, model, skeleton=skeleton)
    d_l = wall_metric(M, lengths.weighting)

    check = verify_median_metric_for(M, d_l)
    if not check.ok:
        raise ConsistencyError("d_l is not a median metric for the median of M", witness=check.witness)

    images = [output.embedding[m] for m in M.elements]
    image_dist = model.distance_matrix(images)
    alpha, epsilon = fit_two_sided(d_l.dist, image_dist)

    beta, gamma = parallel_edge_constants(M, output.embedding, model, bound=output.bound, skeleton=skeleton)
    params = model.params
    apriori = (max(1.0, params.k), params.h0 + 2 * output.bound)
    checked = check_geodesics(M, skeleton, output.embedding, model, params.k, apriori[1], seed=seed)
    slack = sum(lengths.lengths[w] for w in lengths.replaced)
    envelope = _check_envelope(M, d_l.dist, image_dist, apriori[0], apriori[1], slack)

    report = ApproximationReport(
        resolver=resolver.name, algebra=M, skeleton=skeleton, lengths=lengths,
        embedding=output.embedding, alpha=alpha, epsilon=epsilon, beta=beta, gamma=gamma,
        covered=covered, bound=output.bound, apriori=apriori, envelope=envelope,
        exactified=output.exactified, tight_bound=output.tight_bound,
        chained_bound=output.chained_bound, geodesics_checked=checked,
    )
    logger.info(f"Approximation via {resolver.name}: |A|={len(A)}, |M|={len(M)}, "
                f"alpha={alpha}, epsilon={epsilon}, beta={beta}, gamma={gamma}")
    return report
