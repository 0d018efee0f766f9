from __future__ import annotations

from cli.base import Output, WattlensCommand
from simulator.engine import run
from simulator.services import ensure_completed, export_trace, extrapolated_energy, trace_energy


class Command(WattlensCommand):
    help = "Simulate a program on the given inputs and report its energy."

    def add_arguments(self, parser):
        parser.add_argument("program", help="EIR (.eir) or HIR (.hir) source file.")
        parser.add_argument("--in", dest="bindings", action="append", default=[], metavar="NAME=VALUE")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument("--trace", help="Write the cycle trace as JSON Lines to this file.")
        parser.add_argument(
            "--stats-only",
            action="store_true",
            help="Record per-thread totals only and extrapolate the energy.",
        )
        parser.add_argument("--fuel", type=int, help="Cycle limit of the run.")
        parser.add_argument("--t-max", type=int, help="Hardware thread limit.")

    def run(self, **options) -> Output:
        model = self.model(options)
        source = self.source(options)
        inputs = source.inputs(self.bindings(options))
        trace = ensure_completed(
            run(
                source.program,
                inputs,
                fuel=options["fuel"],
                t_max=options["t_max"],
                record_events=not options["stats_only"],
            )
        )
        if options["stats_only"]:
            report = extrapolated_energy(model, trace.counts)
        else:
            report = trace_energy(model, trace)
            if options["trace"]:
                export_trace(trace, options["trace"])

        data = {
            "program": source.name,
            "outcome": trace.outcome.value,
            "cycles": trace.total_cycles,
            "return_value": trace.return_value,
            "energy": report.to_dict(),
        }
        rows = [(key, float(value)) for key, value in report.per_function.items()]
        rows.append(("total", float(report.value)))
        text = f"{source.name}: {trace.outcome.value} after {trace.total_cycles} cycles\n"
        return Output(data, ("function", "energy_pj"), rows, text)
