from __future__ import annotations

import statistics
from pathlib import Path

from cli.base import Output, WattlensCommand
from cli.constants import HIR_SUFFIX
from cli.services import UsageError
from hir.checker import check_program
from hir.parsers import parse_hir_file
from hir.services import compare_levels


class Command(WattlensCommand):
    help = "Compare instruction-level and statement-level bounds of HIR programs."

    def add_arguments(self, parser):
        parser.add_argument("programs", nargs="+", help="HIR source files.")
        self.add_model_argument(parser)
        self.add_param_argument(parser)

    def run(self, **options) -> Output:
        model = self.model(options)
        params = self.params(options)
        programs = {}
        rows = []
        for path in options["programs"]:
            if not path.endswith(HIR_SUFFIX):
                raise UsageError(f"{path}: compare-levels needs HIR programs")
            comparison = compare_levels(check_program(parse_hir_file(path)), model, params)
            name = Path(path).name
            programs[name] = comparison.to_dict()
            rows.append(
                (
                    name,
                    float(comparison.isa_upper),
                    float(comparison.hir_upper),
                    comparison.upper_deviation,
                    comparison.lower_deviation,
                )
            )
        deviations = [abs(row[3]) for row in rows]
        data = {
            "programs": programs,
            "summary": {
                "median_upper_deviation_pct": statistics.median(deviations),
                "within_one_percent": sum(deviation <= 1 for deviation in deviations) / len(deviations),
            },
        }
        text = f"median upper deviation {data['summary']['median_upper_deviation_pct']:.3f}%\n"
        return Output(data, ("program", "isa_upper_pj", "hir_upper_pj", "upper_dev_pct", "lower_dev_pct"), rows, text)
