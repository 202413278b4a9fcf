import logging

import networkx as nx

from commands import CommandResult, RunConfig
from models.coarse_models import (check_lipschitz, closeness_distance, euclidean_rotation_gap, gap_sweep,
                                  graph_model, invariance_defect, pullback, pushforward,
                                  transport_roundtrip_bound)
from models.errors import InputError
from utils.analytics import run_analytics
from utils.documents import (DocumentError, parse_graph, parse_model, parse_quasi_isometry,
                             parse_transformations, parse_triples)
from utils.helpers import parse_angle
from utils.limits import check_carrier

logger = logging.getLogger('coarsemed.commands.coarse')


class CoarseCommands:
    def __init__(self, registry):
        self.registry = registry

    def hypmedian(self, run: RunConfig) -> CommandResult:
        """Centre quality K, four-point delta and the closeness of two tie-break policies."""
        doc = run.document()
        graph = parse_graph(doc)
        check_carrier("hypmedian", graph.number_of_nodes(), run.mode or "auto")
        geodesics = getattr(run.options, "geodesics", None) or doc.get("geodesics", "bfs")
        tie_break = getattr(run.options, "tie_break", None) or doc.get("tie_break", "lex")
        other = "antilex" if tie_break == "lex" else "lex"

        model = graph_model(graph, tie_break=tie_break, geodesics=geodesics)
        rival = graph_model(graph, tie_break=other, geodesics=geodesics)
        with run_analytics.stage("centres"):
            quality = model.center_quality()
        with run_analytics.stage("delta"):
            delta = model.gromov_delta()
        triples = parse_triples(doc.get("triples"))
        with run_analytics.stage("closeness"):
            closeness = closeness_distance(model, rival, mode=run.mode, samples=run.samples,
                                           seed=run.seed, extra_triples=triples)
        run_analytics.record_checked("closeness", closeness.sample_count)

        payload = {
            "model": model.name,
            "tree": nx.is_tree(graph),
            "K": quality,
            "delta": delta,
            "medians": [[list(t), model.med(*t)] for t in triples],
            "closeness": {"policies": [tie_break, other], **closeness.to_dict()},
        }
        rows = [{"x": t[0], "y": t[1], "z": t[2], "median": model.med(*t)} for t in triples]
        return CommandResult(payload, rows=rows, columns=["x", "y", "z", "median"])

    def gap(self, run: RunConfig) -> CommandResult:
        """Rotation gap of the l1 median on the Euclidean plane, for one k or the sweep 1..k_max."""
        try:
            angle = parse_angle(run.options.angle)
        except ValueError as e:
            raise InputError(str(e))
        if run.options.k_max is not None:
            sweep = gap_sweep(run.options.k_max, angle)
        elif run.options.k is not None:
            sweep = [(run.options.k, euclidean_rotation_gap(run.options.k, angle))]
        else:
            raise InputError("gap needs --k or --k-max")
        rows = [{"k": k, "gap": value} for k, value in sweep]
        payload = {"angle": angle, "rows": rows}
        if len(rows) == 1:
            payload.update(rows[0])
        return CommandResult(payload, rows=rows, columns=["k", "gap"])

    def _transport(self, run: RunConfig, direction: str) -> CommandResult:
        doc = run.document()
        qi = parse_quasi_isometry(doc)
        check_carrier(direction, max(len(qi.source), len(qi.target)), run.mode or "auto")

        if direction == "push":
            moved, native, home = pushforward(qi, qi.source), qi.target, qi.source
            back = pullback(qi, moved)
        else:
            moved, native, home = pullback(qi, qi.target), qi.source, qi.target
            back = pushforward(qi, moved)

        with run_analytics.stage("closeness"):
            closeness = closeness_distance(moved, native, mode=run.mode, samples=run.samples, seed=run.seed)
            roundtrip = closeness_distance(back, home, mode=run.mode, samples=run.samples, seed=run.seed)
        run_analytics.record_checked("closeness", closeness.sample_count + roundtrip.sample_count)

        payload = {
            "quasi_isometry": qi.to_dict(),
            "transported": moved.name,
            "closeness_to_native": closeness.to_dict(),
            "roundtrip": roundtrip.to_dict(),
        }
        if direction == "push":
            payload["roundtrip_bound"] = transport_roundtrip_bound(qi, qi.source)
        else:
            payload["roundtrip_bound"] = transport_roundtrip_bound(qi.inverse(), qi.target)
        if getattr(run.options, "params", False):
            payload["params"] = moved.params.to_dict()
        return CommandResult(payload)

    def push(self, run: RunConfig) -> CommandResult:
        return self._transport(run, "push")

    def pull(self, run: RunConfig) -> CommandResult:
        return self._transport(run, "pull")

    def lipschitz(self, run: RunConfig) -> CommandResult:
        doc = run.document()
        model = parse_model(doc.get("model", doc) if isinstance(doc, dict) else doc)
        check_carrier("lipschitz", len(model), run.mode or "auto")
        k = doc.get("k") if isinstance(doc, dict) else None
        h0 = doc.get("h0") if isinstance(doc, dict) else None
        with run_analytics.stage("lipschitz"):
            report = check_lipschitz(model, k=k, h0=h0, mode=run.mode, samples=run.samples, seed=run.seed)
        run_analytics.record_checked("lipschitz", report.checked)
        payload = {"model": model.name, "params": model.params.to_dict() if k is None or h0 is None else
                   {"k": k, "h0": h0}, **report.to_dict()}
        if not report.ok:
            return CommandResult(payload, ok=False, witness=report.witness,
                                 message=f"coarse Lipschitz condition fails by {report.excess}")
        return CommandResult(payload)

    def invariance(self, run: RunConfig) -> CommandResult:
        doc = run.document()
        if not isinstance(doc, dict) or "model" not in doc:
            raise DocumentError("invariance needs {\"model\": ..., \"transformations\": [...]}")
        model = parse_model(doc["model"])
        check_carrier("invariance", len(model), run.mode or "auto")
        maps = parse_transformations(doc.get("transformations", []), model)
        with run_analytics.stage("invariance"):
            defect = invariance_defect(model, maps, mode=run.mode, samples=run.samples, seed=run.seed,
                                       extra_triples=parse_triples(doc.get("triples")))
        return CommandResult({"model": model.name, "transformations": len(maps), **defect.to_dict()})


def setup(registry):
    commands = CoarseCommands(registry)

    def graph_arguments(parser):
        parser.add_argument("--tie-break", dest="tie_break", choices=["lex", "antilex"])
        parser.add_argument("--geodesics", choices=["bfs", "interval"])

    def gap_arguments(parser):
        parser.add_argument("--angle", default="pi/4", help="rotation angle, e.g. 'pi/4' or '0.5'")
        parser.add_argument("--k", type=float, help="scale of the test points (k, 0) and (0, k)")
        parser.add_argument("--k-max", dest="k_max", type=int, help="sweep k = 1..k_max")

    def transport_arguments(parser):
        parser.add_argument("--params", action="store_true", help="also measure parameters of the transported median")

    registry.add_command("hypmedian", commands.hypmedian, "hyperbolic K-centre median on a graph",
                         arguments=graph_arguments)
    registry.add_command("gap", commands.gap, "rotation gap of the l1 median on the Euclidean plane",
                         arguments=gap_arguments)
    registry.add_command("push", commands.push, "pushforward of a median along a quasi-isometry",
                         arguments=transport_arguments)
    registry.add_command("pull", commands.pull, "pullback of a median along a quasi-isometry",
                         arguments=transport_arguments)
    registry.add_command("lipschitz", commands.lipschitz, "coarse Lipschitz condition of a model")
    registry.add_command("invariance", commands.invariance, "invariance defect under a list of isometries")
