from __future__ import annotations

from cli.base import Output, WattlensCommand
from staticanalysis.services import static_profile


class Command(WattlensCommand):
    help = "Share of the worst-case energy spent in each block and function."

    def add_arguments(self, parser):
        parser.add_argument("program", help="EIR (.eir) or HIR (.hir) source file.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument("--threads", type=int, default=1)
        parser.add_argument("--top", type=int, default=5, help="Number of hottest blocks listed.")

    def run(self, **options) -> Output:
        source = self.source(options)
        profile = static_profile(source.program, None, self.model(options), options["threads"])
        hottest = profile.hottest(options["top"])
        data = {
            "program": source.name,
            **profile.to_dict(),
            "hottest": [name for name, _ in hottest],
        }
        rows = [(name, float(entry.energy), f"{entry.share * 100:.1f}%") for name, entry in hottest]
        return Output(data, ("block", "energy_pj", "share"), rows)
