from __future__ import annotations

from cli.base import Output, WattlensCommand
from probabilistic.services import (
    energy_distribution_exact,
    energy_distribution_mc,
    export_histogram_csv,
    load_distribution,
)


class Command(WattlensCommand):
    help = "Distribution of a program's energy over a distribution of its inputs."

    def add_arguments(self, parser):
        parser.add_argument("program", help="EIR (.eir) or HIR (.hir) source file.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)
        parser.add_argument("--inputs", required=True, help="Input distribution JSON.")
        parser.add_argument("--mc", type=int, metavar="N", help="Sample N runs instead of enumerating.")
        parser.add_argument("--seed", type=int, help="Seed of the Monte-Carlo sampler.")
        parser.add_argument("--histogram", help="Write a histogram CSV to this file.")
        parser.add_argument("--bins", type=int, default=20)

    def run(self, **options) -> Output:
        model = self.model(options)
        source = self.source(options)
        distribution = source.input_distribution(load_distribution(options["inputs"]))

        if options["mc"]:
            result = energy_distribution_mc(source.program, model, distribution, options["mc"], options["seed"])
        else:
            result = energy_distribution_exact(source.program, model, distribution)
        if options["histogram"]:
            export_histogram_csv(result, options["histogram"], options["bins"])

        data = {"program": source.name, **result.to_dict()}
        rows = list(result.summary()["quantiles_pj"].items())
        rows += [("mean", float(result.mean)), ("min", float(result.min)), ("max", float(result.max))]
        return Output(data, ("statistic", "energy_pj"), rows)
