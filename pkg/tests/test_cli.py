"""End-to-end runs of the command line through ``main(argv)``."""
import json
import logging

import pytest

import main as cli
from main import EXIT_FAILED, EXIT_INPUT, EXIT_OK, main

SQUARE = [[0, 0], [0, 1], [1, 0], [1, 1]]

SQUARE_ALGEBRA = {"elements": SQUARE, "median": {"kind": "majority_bits", "dim": 2}}

UNIT_SQUARE = {
    "algebra": SQUARE_ALGEBRA,
    "metric": {"coordinates": SQUARE, "p": 1},
    "pair": [[0, 0], [1, 1]],
}

CUBE3 = {"elements": list(range(8)), "median": {"kind": "majority_bits", "dim": 3}}

# med(a, a, b) = b
BROKEN = {"elements": ["a", "b"], "median": {"kind": "table", "entries": [
    [0, 0, 0, 0], [1, 1, 1, 1], [0, 0, 1, 1], [0, 1, 1, 1],
]}}


@pytest.fixture(autouse=True)
def detach_handlers():
    yield
    root = logging.getLogger()
    for handler in cli._installed_handlers:
        root.removeHandler(handler)
    cli._installed_handlers.clear()


@pytest.fixture
def document(tmp_path):
    def write(payload, name="doc.json"):
        path = tmp_path / name
        path.write_text(json.dumps(payload))
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_validate(self, capsys, document):
        code, out, _ = run(capsys, "validate", "--input", document(CUBE3))
        assert code == EXIT_OK
        report = json.loads(out)["reports"][0]
        assert report["axioms"]["ok"] is True
        assert report["axioms"]["exhaustive"] is True

    def test_validate_sampled(self, capsys, document):
        code, out, _ = run(capsys, "validate", "--input", document(SQUARE_ALGEBRA), "--mode", "sampled",
                           "--seed", "7", "--samples", "5")
        assert code == EXIT_OK
        axioms = json.loads(out)["reports"][0]["axioms"]
        assert axioms["exhaustive"] is False
        assert axioms["checked"] == 5

    def test_validate_samples_past_the_table_cap(self, capsys, document, caps):
        caps(MATERIALIZE_CAP=4, DEFAULT_SAMPLES=50)
        code, out, _ = run(capsys, "validate", "--seed", "3", "--input", document(CUBE3))
        assert code == EXIT_OK
        axioms = json.loads(out)["reports"][0]["axioms"]
        assert axioms["exhaustive"] is False
        assert axioms["checked"] == 50

    def test_validate_exhaustive_past_the_table_cap(self, capsys, document, caps):
        caps(MATERIALIZE_CAP=4)
        assert run(capsys, "validate", "--mode", "exhaustive", "--input", document(CUBE3))[0] == EXIT_INPUT

    def test_failed_check_prints_a_witness(self, capsys, document):
        code, _, err = run(capsys, "validate", "--input", document(BROKEN))
        assert code == EXIT_FAILED
        assert "witness: (" in err

    def test_no_command(self, capsys):
        assert run(capsys)[0] == EXIT_INPUT

    def test_unknown_command(self, capsys):
        assert run(capsys, "triangulate")[0] == EXIT_INPUT

    def test_missing_input(self, capsys, tmp_path):
        code, _, err = run(capsys, "walls", "--input", str(tmp_path / "absent.json"))
        assert code == EXIT_INPUT
        assert "not found" in err

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"elements\": [")
        code, _, err = run(capsys, "walls", "--input", str(path))
        assert code == EXIT_INPUT
        assert "malformed JSON" in err

    def test_cap(self, capsys, document, caps):
        caps(MATERIALIZE_CAP=4)
        assert run(capsys, "walls", "--input", document(CUBE3))[0] == EXIT_INPUT

    def test_sampled_mode_needs_a_seed(self, capsys, document):
        doc = document({"kind": "l1_lattice", "dim": 1, "box": 4})
        assert run(capsys, "lipschitz", "--mode", "sampled", "--input", doc)[0] == EXIT_INPUT

    def test_seed_range(self, capsys, document):
        doc = document({"kind": "l1_lattice", "dim": 1, "box": 4})
        assert run(capsys, "lipschitz", "--seed", "-1", "--input", doc)[0] == EXIT_INPUT


class TestCommands:
    def test_gap(self, capsys):
        code, out, _ = run(capsys, "gap", "--angle", "pi/4", "--k", "2")
        assert code == EXIT_OK
        assert "1.414213562" in out
        assert json.loads(out)["gap"] == pytest.approx(1.414213562)

    def test_gap_sweep_csv(self, capsys):
        code, out, _ = run(capsys, "gap", "--k-max", "3", "--format", "csv")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "k,gap"
        assert len(lines) == 4

    def test_cat0(self, capsys, document):
        code, out, _ = run(capsys, "cat0", "--input", document(UNIT_SQUARE))
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["sigma"][0][3] == pytest.approx(1.414213562)
        assert payload["cube"]["dimension"] == 2

    def test_cat0_csv(self, capsys, document):
        code, out, _ = run(capsys, "cat0", "--format", "csv", "--input", document(UNIT_SQUARE))
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "x,y,d,sigma,lower,upper"
        assert len(lines) == 7
        assert '"(0,0)","(1,1)",2.000000000,1.414213562' in out

    def test_cat0_refuses_a_non_median_metric(self, capsys, document):
        doc = dict(UNIT_SQUARE, metric={"coordinates": SQUARE, "p": 2})
        code, _, err = run(capsys, "cat0", "--input", document(doc))
        assert code == EXIT_FAILED
        assert "witness:" in err

    def test_walls(self, capsys, document):
        code, out, _ = run(capsys, "walls", "--input", document(CUBE3))
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["rank"] == 3
        assert len(payload["walls"]) == 3

    def test_closure(self, capsys, document):
        doc = document({"algebra": CUBE3, "generators": [1, 2, 4]})
        code, out, _ = run(capsys, "closure", "--input", doc)
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["closure"] == [0, 1, 2, 4]
        assert payload["bound"] == 256

    def test_lipschitz(self, capsys, document):
        code, out, _ = run(capsys, "lipschitz", "--input", document({"kind": "l1_lattice", "dim": 2, "box": 3}))
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["ok"] is True
        assert payload["exhaustive"] is True

    def test_approx(self, capsys, document):
        doc = document({"model": {"kind": "l1_lattice", "dim": 2, "box": 4}, "A": [[0, 0], [3, 0], [0, 2], [3, 2]]})
        code, out, _ = run(capsys, "approx", "--input", doc)
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["resolver"] == "lattice"
        assert payload["alpha"] == pytest.approx(1.0)

    def test_output_file(self, capsys, document, tmp_path):
        target = tmp_path / "walls.csv"
        code, out, _ = run(capsys, "walls", "--format", "csv", "--output", str(target), "--input", document(CUBE3))
        assert code == EXIT_OK
        assert out == ""
        assert target.read_text().splitlines()[0] == "wall,half,cohalf,crosses"

    def test_no_csv_for_transport(self, capsys, document):
        lattice = {"kind": "l1_lattice", "dim": 1, "box": 3}
        doc = document({"source": lattice, "target": lattice,
                        "forward": {"permutation": [2, 1, 0]}, "backward": {"permutation": [2, 1, 0]}})
        assert run(capsys, "push", "--input", doc)[0] == EXIT_OK
        assert run(capsys, "push", "--format", "csv", "--input", doc)[0] == EXIT_INPUT


class TestDeterminism:
    def test_same_seed_same_artifact(self, capsys, document):
        doc = document({"vertices": list(range(8)), "edges": [[i, (i + 1) % 8] for i in range(8)]})
        first = run(capsys, "hypmedian", "--mode", "sampled", "--seed", "17", "--samples", "200", "--input", doc)
        second = run(capsys, "hypmedian", "--mode", "sampled", "--seed", "17", "--samples", "200", "--input", doc)
        assert first[0] == second[0] == EXIT_OK
        assert first[1] == second[1]

    def test_logs_stay_off_stdout(self, capsys, document):
        code, out, _ = run(capsys, "walls", "--input", document(CUBE3))
        assert code == EXIT_OK
        json.loads(out)
