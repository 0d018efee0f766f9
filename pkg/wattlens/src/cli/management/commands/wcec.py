from __future__ import annotations

from cli.base import Output, WattlensCommand
from staticanalysis.domain import BoundKind
from staticanalysis.services import bcec, profile_from_bound, wcec


class Command(WattlensCommand):
    help = "Worst-case energy bound of a program over its input domain."
    kind = BoundKind.UPPER

    def add_arguments(self, parser):
        parser.add_argument("program", help="EIR (.eir) or HIR (.hir) source file.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument("--threads", type=int, default=1, help="Threads assumed active throughout.")
        parser.add_argument("--profile", action="store_true", help="Include the static energy profile.")

    def run(self, **options) -> Output:
        model = self.model(options)
        source = self.source(options)
        analyse = wcec if self.kind is BoundKind.UPPER else bcec
        bound = analyse(source.program, None, model, options["threads"])
        data = {"program": source.name, **bound.to_dict()}
        if options["profile"]:
            data["static_profile"] = profile_from_bound(bound).to_dict()
        rows = [(name, float(value)) for name, value in bound.to_report().per_block.items()]
        rows.append(("total", float(bound.value)))
        text = f"{source.name}: {self.kind.value} bound {float(bound.value):.3f} pJ\n"
        return Output(data, ("block", "energy_pj"), rows, text)
