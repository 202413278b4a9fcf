import io
import json

import numpy as np
import pytest

from models.coarse_models import GraphCoarseMedianSpace, l1_lattice_model
from models.cube_complex import path_algebra
from models.errors import InputError
from models.median_metrics import wall_metric
from utils.documents import (DocumentError, load_document, parse_algebra, parse_graph, parse_map, parse_metric,
                             parse_model, parse_points, parse_quasi_isometry, parse_transformations,
                             parse_triples, parse_weighting, render_csv, render_json, write_artifact)

TWO_POINT_ENTRIES = [[0, 0, 0, 0], [1, 1, 1, 1], [0, 0, 1, 0], [0, 1, 1, 1]]


class TestLoading:
    def test_reads_json(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text('{"elements": [1, 2]}')
        assert load_document(str(path)) == {"elements": [1, 2]}

    def test_missing_file(self, tmp_path):
        with pytest.raises(DocumentError, match="not found"):
            load_document(str(tmp_path / "absent.json"))

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"elements": [1, 2}')
        with pytest.raises(DocumentError, match="malformed JSON.*line 1"):
            load_document(str(path))

    def test_stdin(self, monkeypatch):
        monkeypatch.setattr("sys.stdin", io.StringIO('[1, 2, 3]'))
        assert load_document("-") == [1, 2, 3]

    def test_document_errors_are_input_errors(self):
        assert issubclass(DocumentError, InputError)


class TestAlgebraDocuments:
    def test_table_filled_from_permutations(self):
        M = parse_algebra({"elements": ["a", "b"], "median": {"kind": "table", "entries": TWO_POINT_ENTRIES}})
        assert M.med("b", "a", "a") == "a"
        assert M.med("b", "a", "b") == "b"

    def test_undefined_triple(self):
        doc = {"elements": ["a", "b"], "median": {"kind": "table", "entries": TWO_POINT_ENTRIES[:3]}}
        with pytest.raises(DocumentError, match=r"\(0, 1, 1\) undefined"):
            parse_algebra(doc)

    @pytest.mark.parametrize("entries", [
        [[0, 0, 0]],
        [[0, 0, 0, 2]],
        "rows",
    ], ids=["short", "missing", "not-a-list"])
    def test_bad_entries(self, entries):
        with pytest.raises(DocumentError):
            parse_algebra({"elements": ["a", "b"], "median": {"kind": "table", "entries": entries}})

    def test_majority_bits(self):
        M = parse_algebra({"elements": [[0, 0], [0, 1], [1, 0], [1, 1]], "median": {"kind": "majority_bits", "dim": 2}})
        assert M.elements == ((0, 0), (0, 1), (1, 0), (1, 1))
        assert M.med((0, 1), (1, 0), (1, 1)) == (1, 1)

    def test_majority_bits_needs_two_to_the_dim(self):
        with pytest.raises(DocumentError, match="needs 8 elements"):
            parse_algebra({"elements": list(range(4)), "median": {"kind": "majority_bits", "dim": 3}})

    def test_tree(self):
        M = parse_algebra({"elements": ["r", "x", "y"], "median": {"kind": "tree", "edges": [[0, 1], [0, 2]]}})
        assert M.med("x", "y", "r") == "r"

    @pytest.mark.parametrize("doc", [
        {"median": {"kind": "tree", "edges": []}},
        {"elements": [], "median": {"kind": "tree", "edges": []}},
        {"elements": [1, 1], "median": {"kind": "tree", "edges": [[0, 1]]}},
        {"elements": [1, 2], "median": {"kind": "tree", "edges": [[0, 5]]}},
        {"elements": [1, 2], "median": {"kind": "lattice"}},
        {"elements": [1, 2]},
        {"elements": [{"x": 1}], "median": {"kind": "tree", "edges": []}},
    ], ids=["no-elements", "empty", "duplicates", "edge-range", "unknown-kind", "no-median", "object-point"])
    def test_malformed(self, doc):
        with pytest.raises(DocumentError):
            parse_algebra(doc)


class TestMetricDocuments:
    def test_matrix(self):
        X = parse_metric({"points": ["a", "b"], "matrix": [[0, 2], [2, 0]]})
        assert X.d("a", "b") == 2

    def test_points_default_to_the_algebra(self):
        X = parse_metric({"matrix": [[0, 1], [1, 0]]}, points=["u", "v"])
        assert X.points == ("u", "v")

    def test_coordinates(self):
        X = parse_metric({"points": ["p", "q"], "coordinates": [[0, 0], [3, 4]], "p": 1})
        assert X.d("p", "q") == pytest.approx(7.0)
        assert parse_metric({"points": ["p", "q"], "coordinates": [[0, 0], [3, 4]]}).d("p", "q") == pytest.approx(5.0)

    def test_coordinate_count(self):
        with pytest.raises(DocumentError):
            parse_metric({"points": ["p", "q", "r"], "coordinates": [[0, 0], [3, 4]]})

    def test_non_numeric_matrix(self):
        with pytest.raises(DocumentError):
            parse_metric({"points": ["a", "b"], "matrix": [[0, "x"], ["x", 0]]})

    def test_triangle_inequality(self):
        with pytest.raises(InputError):
            parse_metric({"points": [0, 1, 2], "matrix": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]})

    def test_weighting(self):
        M = path_algebra(3)
        d = wall_metric(M, parse_weighting({"0": 1.5, "1": 2}, M))
        assert d.d(0, 2) == pytest.approx(3.5)
        with pytest.raises(DocumentError):
            parse_weighting({"first": 1.0}, M)
        with pytest.raises(DocumentError):
            parse_weighting([1.0, 2.0], M)


class TestGraphAndModelDocuments:
    def test_graph(self):
        graph = parse_graph({"vertices": ["a", "b", "c"], "edges": [[0, 1], [1, 2]]})
        assert set(graph.edges) == {("a", "b"), ("b", "c")}

    def test_disconnected_graph(self):
        with pytest.raises(DocumentError, match="disconnected"):
            parse_graph({"vertices": [0, 1, 2, 3], "edges": [[0, 1], [2, 3]]})

    def test_lattice(self):
        model = parse_model({"kind": "l1_lattice", "dim": 2, "box": 3})
        assert len(model) == 9
        assert model.params.k == 1.0
        assert len(parse_model({"kind": "l1_lattice", "dim": 2, "box": [2, 5]})) == 10

    def test_euclidean(self):
        model = parse_model({"kind": "euclidean", "dim": 2, "radius": 1})
        assert len(model) == 5
        assert model.params.k == pytest.approx(np.sqrt(2))

    def test_graph_model(self):
        model = parse_model({"kind": "graph", "vertices": [0, 1, 2, 3], "edges": [[0, 1], [1, 2], [1, 3]],
                             "tie_break": "antilex"})
        assert isinstance(model, GraphCoarseMedianSpace)
        assert model.tie_break == "antilex"
        assert model.med(0, 2, 3) == 1

    def test_algebra_model(self):
        model = parse_model({
            "kind": "algebra",
            "algebra": {"elements": ["r", "x", "y"], "median": {"kind": "tree", "edges": [[0, 1], [0, 2]]}},
            "metric": {"matrix": [[0, 1, 2], [1, 0, 3], [2, 3, 0]]},
        })
        assert model.med("x", "y", "r") == "r"
        assert model.dist("x", "y") == 3

    @pytest.mark.parametrize("doc", [
        {"kind": "torus", "dim": 2},
        {"dim": 2, "box": 3},
        {"kind": "l1_lattice", "dim": "two", "box": 3},
        {"kind": "l1_lattice", "dim": 2, "box": "3"},
        {"kind": "euclidean", "dim": 2},
    ], ids=["unknown", "no-kind", "dim", "box", "radius"])
    def test_malformed(self, doc):
        with pytest.raises(DocumentError):
            parse_model(doc)


class TestMapDocuments:
    def test_affine(self):
        f = parse_map({"matrix": [[2]], "offset": [1]}, l1_lattice_model(1, 3), "forward")
        assert f((1,)) == (3,)

    def test_pairs(self):
        f = parse_map({"pairs": [[[0], [2]], [[1], [1]]]}, l1_lattice_model(1, 3), "forward")
        assert f((0,)) == (2,)
        with pytest.raises(InputError, match="forward"):
            f((2,))

    def test_needs_a_kind(self):
        with pytest.raises(DocumentError):
            parse_map({"offset": [1]}, l1_lattice_model(1, 3), "forward")
        with pytest.raises(DocumentError):
            parse_map({"pairs": [[[0]]]}, l1_lattice_model(1, 3), "forward")

    def test_bare_list_is_a_permutation(self):
        model = l1_lattice_model(1, 3)
        (reflect,) = parse_transformations([[2, 1, 0]], model)
        assert reflect((0,)) == (2,)
        with pytest.raises(InputError):
            parse_transformations([[0, 0, 1]], model)
        with pytest.raises(DocumentError):
            parse_transformations({"permutation": [2, 1, 0]}, model)

    def test_quasi_isometry(self):
        lattice = {"kind": "l1_lattice", "dim": 1, "box": 3}
        qi = parse_quasi_isometry({"source": lattice, "target": lattice,
                                   "forward": {"permutation": [2, 1, 0]}, "backward": {"permutation": [2, 1, 0]}})
        assert qi.forward((0,)) == (2,)
        assert qi.roundtrip_source == 0
        with pytest.raises(DocumentError):
            parse_quasi_isometry({"source": lattice, "target": lattice})

    def test_points_and_triples(self):
        assert parse_points([[0, 1], [2, 3]]) == [(0, 1), (2, 3)]
        assert parse_triples([[[0], [1], [2]]]) == [((0,), (1,), (2,))]
        assert parse_triples(None) == []
        with pytest.raises(DocumentError):
            parse_points([])
        with pytest.raises(DocumentError):
            parse_triples([[1, 2]])


class TestWriting:
    def test_json(self):
        text = render_json({(0, 1): 1 / 3, "matrix": np.array([[0, 1], [1, 0]]), "small": -1e-12})
        assert text.endswith("\n")
        assert json.loads(text) == {"(0,1)": 0.333333333, "matrix": [[0, 1], [1, 0]], "small": 0.0}
        assert "-0.0" not in text

    def test_csv_cells(self):
        text = render_csv([{"a": True, "b": None, "c": 0.5, "d": (1, 2)}])
        assert text == 'a,b,c,d\ntrue,,0.500000000,"(1,2)"\n'

    def test_csv_column_order(self):
        text = render_csv([{"x": 1, "y": 2}], columns=["y", "x"])
        assert text.splitlines() == ["y,x", "2,1"]
        assert render_csv([], columns=["k", "gap"]) == "k,gap\n"

    def test_csv_needs_columns(self):
        with pytest.raises(DocumentError):
            render_csv([])

    def test_write_to_stdout(self, capsys):
        write_artifact("payload\n")
        write_artifact("more\n", "-")
        assert capsys.readouterr().out == "payload\nmore\n"

    def test_write_to_file(self, tmp_path, capsys):
        path = tmp_path / "out.csv"
        write_artifact("a,b\n", str(path))
        assert path.read_text() == "a,b\n"
        assert capsys.readouterr().out == ""
