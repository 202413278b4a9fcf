import logging
from typing import Any, Dict, Iterable, List

import numpy as np

from commands import CommandResult, RunConfig
from models.cube_complex import one_skeleton, parallel_classes
from models.errors import ConsistencyError
from models.median_algebra import (FiniteMedianAlgebra, crossing_graph, enumerate_walls, median_closure, rank,
                                   verify_median_axioms)
from models.median_metrics import verify_median_metric
from utils.analytics import run_analytics
from utils.documents import DocumentError, parse_algebra, parse_metric, parse_points
from utils.limits import check_carrier

logger = logging.getLogger('coarsemed.commands.algebra')

# 2^(2^|A|) is reported for at most this many generators
CLOSURE_BOUND_GENERATORS = 4


def _ordered(M: FiniteMedianAlgebra, labels: Iterable) -> List:
    members = set(labels)
    return [e for e in M.elements if e in members]


class AlgebraCommands:
    def __init__(self, registry):
        self.registry = registry

    def validate(self, run: RunConfig) -> CommandResult:
        """Median axioms for algebra documents, the interval condition for metric documents, both for instances."""
        reports: List[Dict[str, Any]] = []
        failed = None
        for path, doc in zip(run.inputs, run.documents()):
            report: Dict[str, Any] = {"input": path}
            algebra = None
            if isinstance(doc, dict) and "median" in doc:
                algebra = parse_algebra(doc)
            elif isinstance(doc, dict) and "algebra" in doc:
                algebra = parse_algebra(doc["algebra"])

            if algebra is not None:
                check_carrier("validate", len(algebra), run.mode or "auto")
                with run_analytics.stage("axioms"):
                    axioms = verify_median_axioms(algebra, samples=run.samples, seed=run.seed, mode=run.mode)
                run_analytics.record_checked("axioms", axioms.checked)
                report["axioms"] = axioms.to_dict()
                if not axioms.ok and failed is None:
                    failed = (f"median identity '{axioms.violations[0][0]}' fails", axioms.violations[0][1])

            metric_doc = doc.get("metric", doc) if isinstance(doc, dict) else doc
            if isinstance(metric_doc, dict) and ("matrix" in metric_doc or "coordinates" in metric_doc):
                metric = parse_metric(metric_doc, points=algebra.elements if algebra is not None else None)
                if algebra is not None and set(metric.points) != set(algebra.elements):
                    raise DocumentError(f"{path}: metric points differ from the algebra elements")
                check_carrier("validate", len(metric), run.mode or "auto")
                with run_analytics.stage("median_metric"):
                    median = verify_median_metric(metric)
                report["median_metric"] = median.to_dict()
                if not median.ok and failed is None:
                    failed = ("metric intervals do not meet in exactly one point", median.witness)
                if median.ok and algebra is not None and algebra.table is not None:
                    order = [metric.index[e] for e in algebra.elements]
                    intrinsic = np.argsort(order)[median.table[np.ix_(order, order, order)]]
                    agrees = bool(np.array_equal(intrinsic, algebra.table))
                    report["median_matches_algebra"] = agrees
                    if not agrees and failed is None:
                        i, j, k = np.argwhere(intrinsic != algebra.table)[0]
                        failed = ("metric median differs from the algebra median",
                                  tuple(algebra.labels_of((i, j, k))))

            if len(report) == 1:
                raise DocumentError(f"{path} is neither an algebra nor a metric document")
            reports.append(report)

        if failed:
            return CommandResult({"reports": reports}, ok=False, message=failed[0], witness=failed[1])
        return CommandResult({"reports": reports})

    def closure(self, run: RunConfig) -> CommandResult:
        doc = run.document()
        if not isinstance(doc, dict):
            raise DocumentError("closure needs {\"algebra\": ..., \"generators\": [...]}")
        M = parse_algebra(doc.get("algebra", doc))
        generators = parse_points(doc.get("generators"), "generators")
        check_carrier("closure", len(M), run.mode or "auto")

        with run_analytics.stage("closure"):
            closed = median_closure(M, generators)
        distinct = len(set(generators))
        payload = {
            "generators": _ordered(M, generators),
            "closure": _ordered(M, closed),
            "size": len(closed),
            "bound": 2 ** (2 ** distinct) if distinct <= CLOSURE_BOUND_GENERATORS else None,
        }
        if payload["bound"] is not None and len(closed) > payload["bound"]:
            raise ConsistencyError(f"closure of {distinct} generators has {len(closed)} elements, "
                                   f"more than 2^(2^{distinct})", witness=tuple(generators))
        return CommandResult(payload, rows=[{"element": e} for e in payload["closure"]])

    def walls(self, run: RunConfig) -> CommandResult:
        M = parse_algebra(run.document())
        check_carrier("walls", len(M), run.mode or "auto")
        with run_analytics.stage("walls"):
            walls = enumerate_walls(M)
            graph = crossing_graph(M)
        payload = {
            "walls": [{"half": _ordered(M, w.half), "cohalf": _ordered(M, w.cohalf)} for w in walls],
            "crossing": sorted([sorted(edge) for edge in graph.edges]),
            "rank": rank(M),
        }
        rows = [{"wall": i, "half": len(w.half), "cohalf": len(w.cohalf), "crosses": graph.degree[i]}
                for i, w in enumerate(walls)]
        return CommandResult(payload, rows=rows)

    def cubify(self, run: RunConfig) -> CommandResult:
        M = parse_algebra(run.document())
        check_carrier("cubify", len(M), run.mode or "auto")
        with run_analytics.stage("skeleton"):
            skeleton = one_skeleton(M)
        payload = skeleton.to_dict()
        payload["rank"] = rank(M)
        payload["parallel_classes"] = [len(edges) for edges in parallel_classes(skeleton).values()]
        rows = [{"x": a, "y": b, "wall": w} for (a, b), w in zip(skeleton.edges, payload["edge_wall"])]
        return CommandResult(payload, rows=rows)


def setup(registry):
    commands = AlgebraCommands(registry)
    registry.add_command("validate", commands.validate,
                         "check median axioms (algebra documents) or the median-metric condition (metric documents)")
    registry.add_command("closure", commands.closure, "median closure of a generating set")
    registry.add_command("walls", commands.walls, "walls, crossing pairs and rank of an algebra")
    registry.add_command("cubify", commands.cubify, "1-skeleton of the cube complex of an algebra")
