"""
Finite median algebras as first-class values.

Elements are opaque hashable identifiers; their position in ``elements`` fixes
every ordering used below (wall orientation, closure iteration, tie-breaks).
Internally all work happens on integer indices.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from config import CONFIG
from models.errors import CapExceededError, ConsistencyError, InputError
from utils.helpers import make_sampler
from utils.limits import MODE_SAMPLED, resolve_mode

logger = logging.getLogger('coarsemed.median_algebra')

Label = Hashable
IndexMedian = Callable[[int, int, int], int]

IDENTITY_SYMMETRY = "symmetry"
IDENTITY_MAJORITY = "majority"
IDENTITY_DISTRIBUTIVITY = "distributivity"


class FiniteMedianAlgebra:
    """
    A finite set together with a total ternary operation.

    The operation is either an explicit index table or a rule. Rule-backed
    algebras materialise a numpy table lazily when they are small enough
    (``MATERIALIZE_CAP``); larger ones evaluate the rule on demand.
    """

    def __init__(self, elements: Sequence[Label], index_median: IndexMedian,
                 table: Optional[np.ndarray] = None,
                 table_builder: Optional[Callable[[], np.ndarray]] = None,
                 kind: str = "rule"):
        elements = tuple(elements)
        if not elements:
            raise InputError("a median algebra needs at least one element")
        if len(set(elements)) != len(elements):
            raise InputError("duplicate element identifiers")

        self.elements: Tuple[Label, ...] = elements
        self.index: Dict[Label, int] = {label: i for i, label in enumerate(elements)}
        self.kind = kind
        self._index_median = index_median
        self._table = table
        self._table_builder = table_builder
        self._walls: Optional[Tuple["Wall", ...]] = None
        self._membership: Optional[np.ndarray] = None

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------
    @classmethod
    def from_table(cls, elements: Sequence[Label], table: np.ndarray) -> "FiniteMedianAlgebra":
        """
        Build a table-backed algebra.

        Args:
            elements: Ordered element identifiers
            table (np.ndarray): Integer array of shape (n, n, n) holding median indices

        Raises:
            CapExceededError: If the algebra is larger than ``TABLE_CAP``
            InputError: If the table has the wrong shape or leaves the element set
        """
        n = len(elements)
        if n > CONFIG['TABLE_CAP']:
            raise CapExceededError(f"table-backed algebra has {n} elements, cap is {CONFIG['TABLE_CAP']}")
        table = np.asarray(table)
        if table.shape != (n, n, n):
            raise InputError(f"median table must have shape {(n, n, n)}, got {table.shape}")
        if table.size and (table.min() < 0 or table.max() >= n):
            raise InputError("median table refers to indices outside the element set")
        table = table.astype(np.int32, copy=True)
        table.setflags(write=False)

        def index_median(i, j, k):
            return int(table[i, j, k])

        return cls(elements, index_median, table=table, kind="table")

    @classmethod
    def from_rule(cls, elements: Sequence[Label], rule: Callable[[Label, Label, Label], Label],
                  table_builder: Optional[Callable[[], np.ndarray]] = None,
                  kind: str = "rule") -> "FiniteMedianAlgebra":
        """Build an algebra whose median is computed by ``rule`` on labels."""
        elements = tuple(elements)
        lookup = {label: i for i, label in enumerate(elements)}

        def index_median(i, j, k):
            value = rule(elements[i], elements[j], elements[k])
            try:
                return lookup[value]
            except KeyError:
                raise ConsistencyError(
                    f"median of {elements[i]!r}, {elements[j]!r}, {elements[k]!r} "
                    f"is {value!r}, which is not an element",
                    witness=(elements[i], elements[j], elements[k]))

        return cls(elements, index_median, table_builder=table_builder, kind=kind)

    # ------------------------------------------------------------------
    # basic access
    # ------------------------------------------------------------------
    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, label):
        return label in self.index

    def __repr__(self):
        return f"FiniteMedianAlgebra(kind={self.kind!r}, size={len(self)})"

    def id_of(self, label: Label) -> int:
        try:
            return self.index[label]
        except KeyError:
            raise InputError(f"{label!r} is not an element of the algebra")

    def ids_of(self, labels: Iterable[Label]) -> List[int]:
        return [self.id_of(label) for label in labels]

    def labels_of(self, indices: Iterable[int]) -> List[Label]:
        return [self.elements[int(i)] for i in indices]

    @property
    def table(self) -> Optional[np.ndarray]:
        """The (n, n, n) median index table, or None when too large to materialise."""
        if self._table is None and len(self) <= CONFIG['MATERIALIZE_CAP']:
            if self._table_builder is not None:
                table = np.asarray(self._table_builder(), dtype=np.int32)
            else:
                n = len(self)
                table = np.empty((n, n, n), dtype=np.int32)
                for i, j, k in itertools.product(range(n), repeat=3):
                    table[i, j, k] = self._index_median(i, j, k)
            table.setflags(write=False)
            self._table = table
            logger.debug(f"Materialised median table for {self!r}")
        return self._table

    def med_index(self, i: int, j: int, k: int) -> int:
        if self._table is not None:
            return int(self._table[i, j, k])
        return self._index_median(i, j, k)

    def med(self, x: Label, y: Label, z: Label) -> Label:
        return self.elements[self.med_index(self.id_of(x), self.id_of(y), self.id_of(z))]

    def median_row(self, i: int, j: int) -> np.ndarray:
        """Vector of med(i, j, z) over all z."""
        table = self.table
        if table is not None:
            return table[i, j, :]
        return np.fromiter((self._index_median(i, j, k) for k in range(len(self))),
                           dtype=np.int64, count=len(self))

    def subalgebra(self, subset: Iterable[Label]) -> "FiniteMedianAlgebra":
        """
        Induced median algebra on a med-closed subset (kept in the parent's order).

        Raises:
            InputError: If the subset is empty or not closed under the median
        """
        ids = sorted(set(self.ids_of(subset)))
        if not ids:
            raise InputError("empty generating set")
        closure = _closure_indices(self, ids)
        if len(closure) != len(ids):
            extra = sorted(set(closure) - set(ids))
            raise InputError(f"subset is not closed under med; missing {self.labels_of(extra[:3])}")

        position = {parent: child for child, parent in enumerate(ids)}
        labels = self.labels_of(ids)
        parent = self

        def index_median(i, j, k):
            return position[parent.med_index(ids[i], ids[j], ids[k])]

        table = None
        if self.table is not None:
            remap = np.full(len(self), -1, dtype=np.int32)
            remap[ids] = np.arange(len(ids), dtype=np.int32)
            table = remap[self.table[np.ix_(ids, ids, ids)]]
            table.setflags(write=False)
        return FiniteMedianAlgebra(labels, index_median, table=table, kind=f"sub({self.kind})")


@dataclass(frozen=True)
class Wall:
    """
    A convex bipartition {half, cohalf} of a finite median algebra.

    ``half`` is the side containing the element listed first in the algebra,
    so equal walls compare equal as values.
    """
    half: FrozenSet[Label]
    cohalf: FrozenSet[Label]

    def side(self, label: Label) -> bool:
        """True when ``label`` lies in ``half``."""
        return label in self.half

    def separates(self, a: Label, b: Label) -> bool:
        return (a in self.half) != (b in self.half)


def make_wall(M: FiniteMedianAlgebra, half_ids: Iterable[int]) -> Wall:
    """Build the canonically oriented wall with one side ``half_ids``."""
    half = set(int(i) for i in half_ids)
    cohalf = set(range(len(M))) - half
    if not half or not cohalf:
        raise ConsistencyError("a wall needs two non-empty sides")
    if 0 not in half:
        half, cohalf = cohalf, half
    return Wall(frozenset(M.labels_of(sorted(half))), frozenset(M.labels_of(sorted(cohalf))))


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of verify_median_axioms; ``ok`` holds exactly when nothing was violated"""
    violations: Tuple[Tuple[str, Tuple[Label, ...]], ...] = field(default_factory=tuple)
    exhaustive: bool = True
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "ok": self.ok,
            "exhaustive": self.exhaustive,
            "checked": self.checked,
            "violations": [[name, list(witness)] for name, witness in self.violations],
        }


def verify_median_axioms(M: FiniteMedianAlgebra, samples: Optional[int] = None, seed: Optional[int] = 0,
                         max_witnesses: Optional[int] = None, mode: Optional[str] = None) -> AxiomReport:
    """
    Check the three median-algebra identities.

    Without a mode the check is exhaustive while the median table can be
    materialised and falls back to ``samples`` seeded 5-tuples past that.

    Args:
        M (FiniteMedianAlgebra): Candidate algebra
        samples (Optional[int]): Sample count in sampled mode
        seed (Optional[int]): Sampler seed, required in sampled mode
        max_witnesses (Optional[int]): Stop collecting after this many witnesses
        mode (Optional[str]): 'exhaustive', 'sampled' or None for automatic

    Returns:
        AxiomReport: Every violating witness found

    Raises:
        CapExceededError: If exhaustive mode is forced beyond ``MATERIALIZE_CAP``
        InputError: If sampled mode has no seed
    """
    n = len(M)
    mode = resolve_mode(mode, n, CONFIG['MATERIALIZE_CAP'], seed)
    if mode == MODE_SAMPLED:
        return _verify_axioms_sampled(M, samples or CONFIG['DEFAULT_SAMPLES'], seed, max_witnesses)

    table = M.table
    ar = np.arange(n)
    violations: List[Tuple[str, Tuple[Label, ...]]] = []

    def collect(name, tuples):
        for row in tuples:
            if max_witnesses is not None and len(violations) >= max_witnesses:
                return
            violations.append((name, tuple(M.labels_of(row))))

    X, Y, Z = np.meshgrid(ar, ar, ar, indexing='ij')
    bad = (table != table[X, Z, Y]) | (table != table[Y, Z, X])
    collect(IDENTITY_SYMMETRY, np.argwhere(bad))

    repeated = table[ar[:, None], ar[:, None], ar[None, :]]
    bad_pairs = np.argwhere(repeated != ar[:, None])
    collect(IDENTITY_MAJORITY, ((x, x, y) for x, y in bad_pairs))

    for u in range(n):
        for v in range(n):
            if max_witnesses is not None and len(violations) >= max_witnesses:
                break
            col = table[:, u, v]
            lhs = col[table]
            rhs = table[ar[:, None, None], col[None, :, None], col[None, None, :]]
            bad_tuples = np.argwhere(lhs != rhs)
            if len(bad_tuples):
                collect(IDENTITY_DISTRIBUTIVITY, ((x, y, z, u, v) for x, y, z in bad_tuples))

    report = AxiomReport(violations=tuple(violations), exhaustive=True, checked=n ** 5)
    if report.ok:
        logger.debug(f"Median axioms hold on {M!r}")
    else:
        logger.info(f"Median axioms fail on {M!r}: {len(violations)} witnesses, first {violations[0]}")
    return report


def _verify_axioms_sampled(M, samples, seed, max_witnesses):
    rng = make_sampler(seed, stream=1)
    n = len(M)
    tuples = rng.integers(0, n, size=(samples, 5))
    violations = []
    med = M.med_index
    for x, y, z, u, v in tuples.tolist():
        if max_witnesses is not None and len(violations) >= max_witnesses:
            break
        m = med(x, y, z)
        if m != med(x, z, y) or m != med(y, z, x):
            violations.append((IDENTITY_SYMMETRY, tuple(M.labels_of((x, y, z)))))
        if med(x, x, y) != x:
            violations.append((IDENTITY_MAJORITY, tuple(M.labels_of((x, x, y)))))
        if med(m, u, v) != med(x, med(y, u, v), med(z, u, v)):
            violations.append((IDENTITY_DISTRIBUTIVITY, tuple(M.labels_of((x, y, z, u, v)))))
    logger.info(f"Sampled {samples} tuples on {M!r} (seed {seed}): {len(violations)} violations")
    return AxiomReport(violations=tuple(violations), exhaustive=False, checked=samples)


def _closure_indices(M: FiniteMedianAlgebra, ids: Sequence[int]) -> List[int]:
    members = set(int(i) for i in ids)
    table = M.table
    while True:
        current = sorted(members)
        if table is not None:
            produced = set(np.unique(table[np.ix_(current, current, current)]).tolist())
        else:
            produced = set()
            for i, j, k in itertools.product(current, repeat=3):
                produced.add(M.med_index(i, j, k))
        new = produced - members
        if not new:
            return current
        members |= new


def median_closure(M: FiniteMedianAlgebra, A: Iterable[Label]) -> FrozenSet[Label]:
    """
    The subalgebra generated by ``A``.

    Raises:
        InputError: If ``A`` is empty or names unknown elements
    """
    ids = M.ids_of(A)
    if not ids:
        raise InputError("empty generating set")
    closure = _closure_indices(M, ids)
    logger.debug(f"Closure of {len(set(ids))} generators has {len(closure)} elements")
    return frozenset(M.labels_of(closure))


def interval_ids(M: FiniteMedianAlgebra, i: int, j: int) -> np.ndarray:
    return np.flatnonzero(M.median_row(i, j) == np.arange(len(M)))


def interval(M: FiniteMedianAlgebra, x: Label, y: Label) -> FrozenSet[Label]:
    """The median interval {z : med(x, y, z) = z}."""
    return frozenset(M.labels_of(interval_ids(M, M.id_of(x), M.id_of(y))))


def enumerate_walls(M: FiniteMedianAlgebra) -> List[Wall]:
    """
    All walls of a verified median algebra, each once, in canonical orientation.

    Adjacent pairs are those whose interval has exactly two points; every such
    edge (a, b) contributes the half {z : med(a, b, z) = a}.

    Raises:
        ConsistencyError: If a produced half is not convex or two elements stay unseparated
    """
    if M._walls is not None:
        return list(M._walls)

    n = len(M)
    ar = np.arange(n)
    seen: Dict[FrozenSet[int], Wall] = {}
    for i in range(n):
        for j in range(i + 1, n):
            row = M.median_row(i, j)
            if np.count_nonzero(row == ar) != 2:
                continue
            half = frozenset(np.flatnonzero(row == i).tolist())
            key = half if 0 in half else frozenset(range(n)) - half
            if key not in seen:
                seen[key] = make_wall(M, key)

    walls = list(seen.values())
    membership = _membership_matrix(M, walls)
    for w, wall in enumerate(walls):
        _check_convex(M, membership[w])
        _check_convex(M, ~membership[w])

    if n > 1:
        columns = np.unique(membership.T, axis=0) if walls else np.zeros((1, 0))
        if columns.shape[0] != n:
            pair = _unseparated_pair(membership)
            raise ConsistencyError("two distinct elements are not separated by any wall",
                                   witness=tuple(M.labels_of(pair)))

    M._walls = tuple(walls)
    M._membership = membership
    logger.debug(f"Enumerated {len(walls)} walls of {M!r}")
    return walls


def _membership_matrix(M: FiniteMedianAlgebra, walls: Sequence[Wall]) -> np.ndarray:
    matrix = np.zeros((len(walls), len(M)), dtype=bool)
    for w, wall in enumerate(walls):
        matrix[w, M.ids_of(wall.half)] = True
    return matrix


def wall_membership(M: FiniteMedianAlgebra, walls: Optional[Sequence[Wall]] = None) -> np.ndarray:
    """Boolean matrix (walls x elements), True where the element lies in ``half``."""
    if walls is None:
        enumerate_walls(M)
        return M._membership
    return _membership_matrix(M, walls)


def _check_convex(M: FiniteMedianAlgebra, mask: np.ndarray):
    side = np.flatnonzero(mask)
    if len(side) == 0:
        raise ConsistencyError("wall side is empty")
    n = len(M)
    ar = np.arange(n)
    table = M.table
    for a_pos, a in enumerate(side):
        partners = side[a_pos:]
        if table is not None:
            rows = table[a, partners, :]
        else:
            rows = np.stack([M.median_row(int(a), int(b)) for b in partners])
        escaped = np.argwhere((rows == ar[None, :]) & ~mask[None, :])
        if len(escaped):
            b_pos, z = escaped[0]
            witness = tuple(M.labels_of((a, partners[b_pos], z)))
            logger.error(f"Non-convex wall side; interval of {witness[:2]} contains {witness[2]!r}")
            raise ConsistencyError("wall side is not convex (input is not a median algebra)",
                                   witness=witness)


def _unseparated_pair(membership: np.ndarray) -> Tuple[int, int]:
    n = membership.shape[1]
    for i in range(n):
        for j in range(i + 1, n):
            if np.array_equal(membership[:, i], membership[:, j]):
                return i, j
    return 0, 0


def separating_walls(walls: Iterable[Wall], a: Label, b: Label) -> List[Wall]:
    """The walls with ``a`` and ``b`` on opposite sides (empty iff a = b)."""
    if a == b:
        return []
    return [wall for wall in walls if wall.separates(a, b)]


def crossing(W: Wall, V: Wall) -> bool:
    """
    True when all four quadrants of W and V are non-empty.

    Raises:
        InputError: If W and V are the same wall
    """
    if W == V:
        raise InputError("a wall is not compared with itself for crossing")
    return bool(W.half & V.half) and bool(W.half & V.cohalf) \
        and bool(W.cohalf & V.half) and bool(W.cohalf & V.cohalf)


def crossing_matrix(membership: np.ndarray) -> np.ndarray:
    """Pairwise crossing relation for walls given by their membership rows."""
    inside = membership.astype(np.int64)
    outside = 1 - inside
    quadrants = (
        (inside @ inside.T > 0)
        & (inside @ outside.T > 0)
        & (outside @ inside.T > 0)
        & (outside @ outside.T > 0)
    )
    np.fill_diagonal(quadrants, False)
    return quadrants


def crossing_graph(M: FiniteMedianAlgebra) -> nx.Graph:
    """Graph on wall indices joining crossing walls."""
    walls = enumerate_walls(M)
    graph = nx.Graph()
    graph.add_nodes_from(range(len(walls)))
    crosses = crossing_matrix(wall_membership(M))
    graph.add_edges_from((int(a), int(b)) for a, b in np.argwhere(np.triu(crosses)))
    return graph


def rank(M: FiniteMedianAlgebra) -> int:
    """Size of a largest pairwise-crossing family of walls (0 for a singleton)."""
    if len(M) == 1:
        return 0
    graph = crossing_graph(M)
    return max(len(clique) for clique in nx.find_cliques(graph))
