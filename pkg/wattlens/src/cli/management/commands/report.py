from __future__ import annotations

from cli.base import Output, WattlensCommand
from cli.constants import EXIT_ANALYSIS
from cli.services import build_report
from core.numbers import exact
from probabilistic.services import load_distribution


class Command(WattlensCommand):
    help = "Transparency report: simulated, extrapolated, bounded and parametric energy of one program."

    def add_arguments(self, parser):
        parser.add_argument("program", help="EIR (.eir) or HIR (.hir) source file.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument("--in", dest="bindings", action="append", default=[], metavar="NAME=VALUE")
        parser.add_argument("--inputs", help="Input distribution JSON.")
        parser.add_argument("--threads", type=int, default=1)
        parser.add_argument("--budget", type=float, metavar="PJ", help="Energy budget checked against the upper bound.")

    def run(self, **options) -> Output:
        source = self.source(options)
        report = build_report(
            source,
            self.model(options),
            bindings=self.bindings(options) if options["bindings"] else None,
            params=self.params(options),
            distribution=load_distribution(options["inputs"]) if options["inputs"] else None,
            n_threads=options["threads"],
            budget=exact(options["budget"]) if options["budget"] is not None else None,
        )
        if report.budget is not None and report.within_budget is not True:
            self.exit_code = EXIT_ANALYSIS
        return Output(report.to_dict(), ("estimate", "energy_pj"), report.rows(), f"{report.program}\n")

    def failure_message(self, output: Output) -> str:
        budget = output.data["budget"]
        if budget["within_budget"] is None:
            return f"no upper bound to check the {budget['budget_pj']} pJ budget against"
        return f"worst case exceeds the {budget['budget_pj']} pJ budget"
