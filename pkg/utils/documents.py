"""
JSON and CSV documents read and written by the command line.

Every loader raises DocumentError with the offending key in the message;
writers round floats to the artifact precision so runs diff cleanly.
"""
import csv
import io
import itertools
import json
import logging
import sys
from typing import Any, Callable, Dict, Hashable, List, Mapping, Optional, Sequence

import networkx as nx
import numpy as np

from models.coarse_models import (CoarseMedianSpace, QuasiIsometryPair, affine_map, algebra_model,
                                  euclidean_model, graph_model, l1_lattice_model, permutation_map)
from models.cube_complex import majority_bits_algebra, tree_algebra
from models.errors import InputError
from models.median_algebra import FiniteMedianAlgebra
from models.median_metrics import FiniteMetric, WallWeighting, coordinate_metric
from utils.helpers import format_float, format_label, round_floats

logger = logging.getLogger('coarsemed.documents')

STDIO = "-"


class DocumentError(InputError):
    """Exception raised when a JSON document is malformed"""
    pass


# ----------------------------------------------------------------------
# reading
# ----------------------------------------------------------------------
def load_document(path: str) -> Any:
    """
    Read one JSON document.

    Args:
        path (str): File path, or '-' for stdin

    Raises:
        DocumentError: If the file is missing or not valid JSON
    """
    try:
        if path == STDIO:
            return json.load(sys.stdin)
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise DocumentError(f"input file {path} not found")
    except json.JSONDecodeError as e:
        logger.error(f"Malformed JSON in {path}: {e}")
        raise DocumentError(f"malformed JSON in {path}: line {e.lineno}, column {e.colno}")


def _require(doc: Mapping, key: str, where: str):
    if not isinstance(doc, Mapping):
        raise DocumentError(f"{where} must be a JSON object")
    if key not in doc:
        raise DocumentError(f"{where} is missing '{key}'")
    return doc[key]


def as_point(value: Any) -> Hashable:
    """JSON arrays become tuples so they can label points."""
    if isinstance(value, list):
        return tuple(as_point(v) for v in value)
    if isinstance(value, dict):
        raise DocumentError("points must be scalars or arrays")
    return value


def _index_pairs(edges: Any, n: int, where: str) -> List[tuple]:
    if not isinstance(edges, list):
        raise DocumentError(f"{where} edges must be an array")
    pairs = []
    for edge in edges:
        if not isinstance(edge, list) or len(edge) != 2 or not all(isinstance(i, int) for i in edge):
            raise DocumentError(f"{where} edge {edge!r} must be a pair of indices")
        if not all(0 <= i < n for i in edge):
            raise DocumentError(f"{where} edge {edge!r} refers to a missing element")
        pairs.append(tuple(edge))
    return pairs


def _elements(doc: Mapping, key: str, where: str) -> List[Hashable]:
    raw = _require(doc, key, where)
    if not isinstance(raw, list) or not raw:
        raise DocumentError(f"{where} '{key}' must be a non-empty array")
    elements = [as_point(v) for v in raw]
    if len(set(elements)) != len(elements):
        raise DocumentError(f"{where} '{key}' contains duplicates")
    return elements


def _median_table(entries: Any, n: int) -> np.ndarray:
    """
    Table from [i, j, k, m] rows; cells left out are filled from a listed permutation.

    Raises:
        DocumentError: If a row is malformed or a triple stays undefined
    """
    if not isinstance(entries, list):
        raise DocumentError("median 'entries' must be an array")
    table = np.full((n, n, n), -1, dtype=np.int64)
    for row in entries:
        if not isinstance(row, list) or len(row) != 4 or not all(isinstance(v, int) for v in row):
            raise DocumentError(f"median entry {row!r} must be four indices")
        if not all(0 <= v < n for v in row):
            raise DocumentError(f"median entry {row!r} refers to a missing element")
        i, j, k, m = row
        table[i, j, k] = m
    for i, j, k in itertools.product(range(n), repeat=3):
        if table[i, j, k] >= 0:
            continue
        for p in itertools.permutations((i, j, k)):
            if table[p] >= 0:
                table[i, j, k] = table[p]
                break
        else:
            raise DocumentError(f"median table leaves ({i}, {j}, {k}) undefined")
    return table


def parse_algebra(doc: Mapping) -> FiniteMedianAlgebra:
    """
    Algebra document: {"elements": [...], "median": {"kind": "table"|"majority_bits"|"tree", ...}}.

    Raises:
        DocumentError: For a malformed document
    """
    elements = _elements(doc, "elements", "algebra")
    median = _require(doc, "median", "algebra")
    kind = _require(median, "kind", "median")
    n = len(elements)

    if kind == "table":
        return FiniteMedianAlgebra.from_table(elements, _median_table(_require(median, "entries", "median"), n))
    if kind == "majority_bits":
        dim = _require(median, "dim", "median")
        if not isinstance(dim, int) or dim < 0:
            raise DocumentError("majority_bits 'dim' must be a non-negative integer")
        if n != 2 ** dim:
            raise DocumentError(f"majority_bits of dimension {dim} needs {2 ** dim} elements, got {n}")
        return majority_bits_algebra(dim, labels=elements)
    if kind == "tree":
        pairs = _index_pairs(_require(median, "edges", "median"), n, "tree")
        return tree_algebra(elements, [(elements[i], elements[j]) for i, j in pairs])
    raise DocumentError(f"unknown median kind {kind!r}")


def parse_metric(doc: Mapping, points: Optional[Sequence[Hashable]] = None) -> FiniteMetric:
    """
    Metric document: {"points": [...], "matrix": [[...]]} or {"points": [...], "coordinates": [[...]], "p": 2}.

    Args:
        doc (Mapping): The document
        points: Default point labels when the document leaves them out
    """
    if "points" in doc or points is None:
        points = _elements(doc, "points", "metric")
    points = list(points)
    if "coordinates" in doc:
        coords = _require(doc, "coordinates", "metric")
        try:
            base = coordinate_metric([tuple(float(c) for c in row) for row in coords], p=float(doc.get("p", 2)))
        except (TypeError, ValueError):
            raise DocumentError("metric 'coordinates' must be rows of numbers")
        if len(base) != len(points):
            raise DocumentError("metric 'coordinates' and 'points' differ in length")
        return FiniteMetric(tuple(points), base.dist)
    matrix = _require(doc, "matrix", "metric")
    try:
        dist = np.array(matrix, dtype=np.float64)
    except (TypeError, ValueError):
        raise DocumentError("metric 'matrix' must be a numeric square array")
    return FiniteMetric(tuple(points), dist)


def parse_weighting(doc: Mapping, M: FiniteMedianAlgebra) -> WallWeighting:
    """Wall weighting: {"wall_index": length}; a wall left out fails once the metric is built."""
    if not isinstance(doc, Mapping):
        raise DocumentError("wall weighting must be an object of wall index -> length")
    try:
        lengths = {int(key): float(value) for key, value in doc.items()}
    except (TypeError, ValueError):
        raise DocumentError("wall weighting keys must be indices and values numbers")
    return WallWeighting.from_indices(M, lengths)


def parse_graph(doc: Mapping) -> nx.Graph:
    """Graph document: {"vertices": [...], "edges": [[i, j], ...]} with indices into ``vertices``."""
    vertices = _elements(doc, "vertices", "graph")
    graph = nx.Graph()
    graph.add_nodes_from(vertices)
    graph.add_edges_from((vertices[i], vertices[j]) for i, j in
                         _index_pairs(_require(doc, "edges", "graph"), len(vertices), "graph"))
    if not nx.is_connected(graph):
        raise DocumentError("graph is disconnected")
    return graph


def _number(doc: Mapping, key: str, cast: Callable, where: str = "model"):
    value = _require(doc, key, where)
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise DocumentError(f"{where} '{key}' must be a number, got {value!r}")


def parse_model(doc: Mapping) -> CoarseMedianSpace:
    """
    Model descriptor.

    Kinds:
        l1_lattice: {"dim", "box"}
        euclidean: {"dim", "radius"}
        graph: {"vertices", "edges", "tie_break"?, "geodesics"?}
        algebra: {"algebra", "metric"}
    """
    kind = _require(doc, "kind", "model")
    if kind == "l1_lattice":
        box = _require(doc, "box", "model")
        if not isinstance(box, (int, list)):
            raise DocumentError("model 'box' must be an integer or an array of sides")
        return l1_lattice_model(_number(doc, "dim", int), box)
    if kind == "euclidean":
        return euclidean_model(_number(doc, "dim", int), _number(doc, "radius", float))
    if kind == "graph":
        return graph_model(parse_graph(doc), tie_break=doc.get("tie_break", "lex"),
                           geodesics=doc.get("geodesics", "bfs"))
    if kind == "algebra":
        M = parse_algebra(_require(doc, "algebra", "model"))
        return algebra_model(M, parse_metric(_require(doc, "metric", "model"), points=M.elements))
    raise DocumentError(f"unknown model kind {kind!r}")


def parse_map(doc: Mapping, source: CoarseMedianSpace, where: str) -> Callable:
    """
    A point map: {"matrix": [[...]], "offset": [...]}, {"permutation": [...]} or {"pairs": [[x, fx], ...]}.
    """
    if not isinstance(doc, Mapping):
        raise DocumentError(f"{where} map must be an object")
    if "matrix" in doc:
        return affine_map(np.array(doc["matrix"]), None if doc.get("offset") is None else np.array(doc["offset"]))
    if "permutation" in doc:
        return permutation_map(source, doc["permutation"])
    if "pairs" in doc:
        table = {}
        for pair in doc["pairs"]:
            if not isinstance(pair, list) or len(pair) != 2:
                raise DocumentError(f"{where} map pair {pair!r} must be [point, image]")
            table[as_point(pair[0])] = as_point(pair[1])

        def apply(point):
            try:
                return table[point]
            except KeyError:
                raise InputError(f"{point!r} has no image under the {where} map")
        return apply
    raise DocumentError(f"{where} map needs 'matrix', 'permutation' or 'pairs'")


def parse_transformations(doc: Any, model: CoarseMedianSpace) -> List[Callable]:
    """Transformation list: permutation arrays or affine maps."""
    if not isinstance(doc, list):
        raise DocumentError("transformations must be an array")
    maps = []
    for entry in doc:
        if isinstance(entry, list):
            entry = {"permutation": entry}
        maps.append(parse_map(entry, model, "transformation"))
    return maps


def parse_quasi_isometry(doc: Mapping) -> QuasiIsometryPair:
    """{"source": model, "target": model, "forward": map, "backward": map}."""
    source = parse_model(_require(doc, "source", "quasi-isometry"))
    target = parse_model(_require(doc, "target", "quasi-isometry"))
    forward = parse_map(_require(doc, "forward", "quasi-isometry"), source, "forward")
    backward = parse_map(_require(doc, "backward", "quasi-isometry"), target, "backward")
    return QuasiIsometryPair(source, target, forward, backward)


def parse_points(doc: Any, where: str = "A") -> List[Hashable]:
    if not isinstance(doc, list) or not doc:
        raise DocumentError(f"'{where}' must be a non-empty array of points")
    return [as_point(p) for p in doc]


def parse_triples(doc: Any) -> List[tuple]:
    triples = [as_point(t) for t in (doc or [])]
    if any(not isinstance(t, tuple) or len(t) != 3 for t in triples):
        raise DocumentError("triples must be arrays of three points")
    return triples


# ----------------------------------------------------------------------
# writing
# ----------------------------------------------------------------------
def _plain(obj: Any) -> Any:
    """Convert tuples used as labels into JSON-safe values, keyed objects into string keys."""
    if isinstance(obj, dict):
        return {format_label(key) if not isinstance(key, str) else key: _plain(value)
                for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def render_json(payload: Any) -> str:
    return json.dumps(round_floats(_plain(payload)), indent=2, ensure_ascii=False) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return format_label(value)


def render_csv(rows: Sequence[Dict[str, Any]], columns: Optional[Sequence[str]] = None) -> str:
    """
    Rows as CSV with floats fixed to the artifact precision.

    Raises:
        DocumentError: If there are no rows and no columns
    """
    if columns is None:
        if not rows:
            raise DocumentError("nothing to write as CSV")
        columns = list(rows[0].keys())
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(column)) for column in columns])
    return buffer.getvalue()


def write_artifact(text: str, path: Optional[str] = None):
    """Write an artifact to ``path``, or stdout when no path (or '-') is given."""
    if path is None or path == STDIO:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    logger.info(f"Wrote {path}")
