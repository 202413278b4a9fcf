import logging
from typing import Dict, List

import numpy as np

from commands import CommandResult, RunConfig
from models.cat0_deform import cat0_metric, cube_weight, maximal_diagonal_cube, sandwich_rows
from models.errors import ConsistencyError
from models.median_algebra import FiniteMedianAlgebra, enumerate_walls, median_closure
from models.median_metrics import (THICKNESS_MAX, THICKNESS_MIN, MetricMedianAlgebraInstance,
                                   check_monotonicity, rectifiability_diagnostics, rectified_metric,
                                   verify_median_metric, verify_median_metric_for, wall_metric, wall_thickness)
from utils.analytics import run_analytics
from utils.documents import DocumentError, as_point, parse_algebra, parse_metric, parse_weighting
from utils.limits import check_carrier

logger = logging.getLogger('coarsemed.commands.metric')


def _instance_document(run: RunConfig, command: str):
    doc = run.document()
    if not isinstance(doc, dict) or "algebra" not in doc:
        raise DocumentError(f"{command} needs {{\"algebra\": ..., \"metric\": ...}}")
    M = parse_algebra(doc["algebra"])
    check_carrier(command, len(M), run.mode or "auto")
    return doc, M


def _instance(doc: dict, M: FiniteMedianAlgebra) -> MetricMedianAlgebraInstance:
    if "metric" not in doc:
        raise DocumentError("document is missing 'metric'")
    metric = parse_metric(doc["metric"], points=M.elements)
    if set(metric.points) != set(M.elements):
        raise DocumentError("metric points differ from the algebra elements")
    return MetricMedianAlgebraInstance(M, metric)


def _pair_rows(points, **matrices: np.ndarray) -> List[Dict]:
    rows = []
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            row = {"x": points[i], "y": points[j]}
            row.update({name: float(matrix[i, j]) for name, matrix in matrices.items()})
            rows.append(row)
    return rows


class MetricCommands:
    def __init__(self, registry):
        self.registry = registry

    def metric(self, run: RunConfig) -> CommandResult:
        """d_l for {"algebra", "weights"}; uniform unit weights when no weights are given."""
        doc, M = _instance_document(run, "metric")
        walls = enumerate_walls(M)
        weights = doc.get("weights")
        if weights is None:
            weights = {str(w): 1.0 for w in range(len(walls))}
        with run_analytics.stage("wall_metric"):
            d = wall_metric(M, parse_weighting(weights, M))
        with run_analytics.stage("median_metric"):
            check = verify_median_metric_for(M, d)
        if not check.ok:
            raise ConsistencyError("wall metric is not median for the algebra", witness=check.witness)
        payload = {"points": list(d.points), "matrix": d.dist, "walls": len(walls), "median": True}
        return CommandResult(payload, rows=_pair_rows(d.points, d=d.dist))

    def rectify(self, run: RunConfig) -> CommandResult:
        doc, M = _instance_document(run, "rectify")
        inst = _instance(doc, M)
        thickness = getattr(run.options, "thickness", None) or doc.get("thickness", THICKNESS_MAX)

        with run_analytics.stage("rectify"):
            rectified = rectified_metric(inst, thickness=thickness)
        thick = wall_thickness(inst)
        walls = enumerate_walls(M)
        payload = {
            "points": list(M.elements),
            "thickness_selector": thickness,
            "matrix": rectified.dist,
            "thickness": {str(w): list(thick[wall]) for w, wall in enumerate(walls)},
        }

        with run_analytics.stage("diagnostics"):
            payload["diagnostics"] = rectifiability_diagnostics(inst, seed=run.rng_seed).to_dict()

        pairs = doc.get("pairs")
        if pairs:
            nested = [([as_point(p) for p in inner], [as_point(p) for p in outer]) for inner, outer in pairs]
            nested = [(median_closure(M, inner), median_closure(M, outer)) for inner, outer in nested]
            with run_analytics.stage("monotonicity"):
                monotone = check_monotonicity(inst, nested, thickness=thickness)
            run_analytics.record_checked("monotonicity", monotone.checked)
            payload["monotonicity"] = monotone.to_dict()
            if not monotone.ok:
                x, y, inner, outer = monotone.violations[0]
                return CommandResult(payload, ok=False, witness=(x, y),
                                     message=f"rectified distance shrinks from {inner} to {outer} "
                                             f"in a larger subalgebra")

        rows = _pair_rows(M.elements, d=inst.metric.dist, rectified=rectified.dist)
        return CommandResult(payload, rows=rows)

    def cat0(self, run: RunConfig) -> CommandResult:
        doc, M = _instance_document(run, "cat0")
        inst = _instance(doc, M)
        with run_analytics.stage("median_metric"):
            check = verify_median_metric(inst.metric)
        if not check.ok:
            return CommandResult({"median_metric": check.to_dict()}, ok=False, witness=check.witness,
                                 message="input metric is not median")

        with run_analytics.stage("sigma"):
            sigma = cat0_metric(M, inst.metric)
        rows = sandwich_rows(M, inst.metric, sigma)
        payload = {"points": list(M.elements), "sigma": sigma.dist, "rows": rows}

        pair = doc.get("pair")
        if pair:
            x, y = (as_point(p) for p in pair)
            cube = maximal_diagonal_cube(M, inst.metric, x, y)
            payload["cube"] = {
                "endpoints": list(cube.endpoints),
                "dimension": cube.dimension,
                "block_lengths": list(cube.block_lengths),
                "vertices": list(cube.vertices),
                "weight": cube_weight(cube),
            }
        return CommandResult(payload, rows=rows, columns=["x", "y", "d", "sigma", "lower", "upper"])


def setup(registry):
    commands = MetricCommands(registry)
    registry.add_command("metric", commands.metric, "wall metric d_l of a weighted algebra")

    def rectify_arguments(parser):
        parser.add_argument("--thickness", choices=[THICKNESS_MAX, THICKNESS_MIN],
                            help="edge thickness used per wall (default: max)")

    registry.add_command("rectify", commands.rectify, "rectified metric and rectifiability diagnostics",
                         arguments=rectify_arguments)
    registry.add_command("cat0", commands.cat0, "sigma_d deformation with the sandwich bounds")
