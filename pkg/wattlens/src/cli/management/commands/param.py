from __future__ import annotations

from cli.base import Output, WattlensCommand
from cli.services import UsageError, parse_bindings
from hir.services import lift_model
from parametric.services import eval_cost, extract_relations, solve
from staticanalysis.domain import BoundKind


class Command(WattlensCommand):
    help = "Closed-form energy cost functions of every function in a HIR program."

    def add_arguments(self, parser):
        parser.add_argument("program", help="HIR source file.")
        self.add_model_argument(parser)
        parser.add_argument(
            "--at",
            action="append",
            default=[],
            metavar="NAME=N",
            help="Evaluate the entry function's cost at these parameter values.",
        )

    def run(self, **options) -> Output:
        source = self.source(options)
        if source.hir is None:
            raise UsageError(f"{source.name}: param needs a HIR program")
        costs = lift_model(self.model(options), source.program, source.mapping)
        functions = solve(extract_relations(source.hir, costs))
        data = {
            "program": source.name,
            "entry": source.hir.entry,
            "functions": {name: cost.to_dict() for name, cost in sorted(functions.items())},
        }
        rows = [(name, cost.format(True), cost.format(False)) for name, cost in sorted(functions.items())]
        text = ""
        if options["at"]:
            bindings = parse_bindings(options["at"])
            entry = functions[source.hir.entry]
            upper = eval_cost(entry, bindings, BoundKind.UPPER)
            lower = eval_cost(entry, bindings, BoundKind.LOWER)
            data["evaluated"] = {"at": bindings, "upper_pj": float(upper), "lower_pj": float(lower)}
            text = f"{source.hir.entry} at {bindings}: {float(lower):.3f}..{float(upper):.3f} pJ\n"
        return Output(data, ("function", "upper", "lower"), rows, text)
