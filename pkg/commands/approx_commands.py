import logging

from commands import CommandResult, RunConfig
from models.approx_engine import LATTICE_RESOLVER, approximate, make_tree_resolver
from models.errors import InputError
from utils.analytics import run_analytics
from utils.documents import DocumentError, as_point, parse_model, parse_points

logger = logging.getLogger('coarsemed.commands.approx')

RESOLVERS = ("lattice", "tree")


class ApproxCommands:
    def __init__(self, registry):
        self.registry = registry

    def approx(self, run: RunConfig) -> CommandResult:
        """
        Approximate a finite subset A of a model by a finite median metric space.

        Document: {"model": ..., "A": [...], "resolver": "lattice"|"tree", "basepoint"?, "exactify"?}
        """
        doc = run.document()
        if not isinstance(doc, dict) or "model" not in doc:
            raise DocumentError("approx needs {\"model\": ..., \"A\": [...]}")
        model = parse_model(doc["model"])
        A = parse_points(doc.get("A"))

        name = getattr(run.options, "resolver", None) or doc.get("resolver")
        if name is None:
            name = "lattice" if doc["model"].get("kind") == "l1_lattice" else "tree"
        if name not in RESOLVERS:
            raise InputError(f"resolver must be one of {RESOLVERS}")
        if name == "lattice":
            resolver = LATTICE_RESOLVER
        else:
            basepoint = doc.get("basepoint")
            resolver = make_tree_resolver(None if basepoint is None else as_point(basepoint))

        exactify = doc.get("exactify")
        if exactify is not None and not isinstance(exactify, bool):
            raise DocumentError("'exactify' must be true or false")

        with run_analytics.stage("approximate"):
            report = approximate(A, model, resolver, exactify_output=exactify, seed=run.rng_seed)
        run_analytics.record_checked("geodesics", report.geodesics_checked)

        payload = report.to_dict()
        payload["A"] = A
        payload["model"] = model.name
        rows = [{"element": m, "image": report.embedding[m]} for m in report.algebra.elements]
        return CommandResult(payload, rows=rows, columns=["element", "image"])


def setup(registry):
    commands = ApproxCommands(registry)

    def approx_arguments(parser):
        parser.add_argument("--resolver", choices=list(RESOLVERS),
                            help="approximation strategy (default: lattice for l1 lattices, tree otherwise)")

    registry.add_command("approx", commands.approx, "finite median approximation report for a subset",
                         arguments=approx_arguments)
