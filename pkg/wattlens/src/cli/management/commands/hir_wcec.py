from __future__ import annotations

from cli.base import Output, WattlensCommand
from cli.services import UsageError
from hir.services import compare_levels, hir_bcec, hir_wcec, lift_model


class Command(WattlensCommand):
    help = "Statement-level energy bounds of a HIR program."

    def add_arguments(self, parser):
        parser.add_argument("program", help="HIR source file.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument(
            "--compare-isa",
            action="store_true",
            help="Also bound the compiled program and report the deviation.",
        )
        parser.add_argument("--mapping", action="store_true", help="Include the statement mapping table.")

    def run(self, **options) -> Output:
        model = self.model(options)
        source = self.source(options)
        if source.hir is None:
            raise UsageError(f"{source.name}: hir-wcec needs a HIR program")
        params = self.params(options)
        costs = lift_model(model, source.program, source.mapping)
        upper = hir_wcec(source.hir, costs, params)
        lower = hir_bcec(source.hir, costs, params)
        data = {
            "program": source.name,
            "upper": upper.to_dict(),
            "lower": lower.to_dict(),
            "statement_costs": costs.to_dict(),
        }
        if options["mapping"]:
            data["mapping"] = source.mapping.to_dict()
        rows = [("hir upper", float(upper.value)), ("hir lower", float(lower.value))]
        if options["compare_isa"]:
            comparison = compare_levels(source.hir, model, params)
            data["comparison"] = comparison.to_dict()
            rows += [
                ("isa upper", float(comparison.isa_upper)),
                ("isa lower", float(comparison.isa_lower)),
                ("upper deviation %", comparison.upper_deviation),
                ("lower deviation %", comparison.lower_deviation),
            ]
        return Output(data, ("estimate", "value"), rows)
