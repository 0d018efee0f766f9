from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from cli.constants import HIR_SUFFIX
from core.errors import WattlensError
from energy.domain import EnergyModel
from energy.reports import EnergyReport
from hir.checker import check_program
from hir.compiler import MappingTable, bind_inputs, compile_program
from hir.intervals import Interval, ParamSpec
from hir.nodes import HirProgram
from hir.parsers import parse_hir_file
from hir.services import HirAnalysisError, hir_bcec, hir_wcec, lift_model
from machine.domain import Program
from machine.parsers import parse_file
from parametric.domain import CostFunction, ParametricError
from parametric.services import extract_relations, solve
from probabilistic.domain import EnergyDistribution, InputDistribution
from probabilistic.services import energy_distribution_exact
from simulator.engine import run
from simulator.services import ensure_completed, extrapolated_energy, trace_energy
from staticanalysis.domain import AnalysisError, EnergyBound, StaticProfile
from staticanalysis.services import bcec, profile_from_bound, wcec

logger = logging.getLogger(__name__)

BINDING = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*(?:\[\d+\])?)\s*=\s*(.+?)\s*$")
SPAN = re.compile(r"^(-?\d+)\s*\.\.\s*(-?\d+)$")


class UsageError(WattlensError):
    """Raised when command-line values cannot be interpreted."""


class ReportConsistencyError(WattlensError):
    """Raised when a report's estimates contradict each other."""


@dataclass(frozen=True)
class LoadedProgram:
    path: Path
    program: Program
    hir: HirProgram | None = None
    mapping: MappingTable | None = None

    @property
    def name(self) -> str:
        return self.path.name

    def inputs(self, bindings: Mapping[str, int | list[int]]) -> dict[str, int]:
        """Simulator inputs; HIR programs take parameter and array names."""
        if self.hir is not None:
            return bind_inputs(self.hir, bindings)
        flat: dict[str, int] = {}
        for name, value in bindings.items():
            if isinstance(value, list):
                raise UsageError(f"{name}: EIR inputs take a single value")
            flat[name] = value
        return flat

    def input_distribution(self, distribution: InputDistribution) -> InputDistribution:
        """Rename HIR parameters to the registers and words they are passed in."""
        if self.hir is None:
            return distribution
        if distribution.ranges:
            renamed = {}
            for name, span in distribution.ranges.items():
                (register,) = self.inputs({name: span[0]})
                renamed[register] = span
            return InputDistribution.uniform(renamed)
        return InputDistribution(support=tuple((self.inputs(binding), p) for binding, p in distribution.items()))


def load_source(path: Path | str, params: ParamSpec | None = None) -> LoadedProgram:
    """Read an EIR program, or compile a HIR one with ``params`` bounding its loops."""
    path = Path(path)
    if path.suffix == HIR_SUFFIX:
        hir = check_program(parse_hir_file(path))
        program, mapping = compile_program(hir, params)
        return LoadedProgram(path, program, hir, mapping)
    return LoadedProgram(path, parse_file(path))


def parse_bindings(pairs: Iterable[str]) -> dict[str, int | list[int]]:
    """``name=5`` or ``name=1,2,3`` pairs from the command line."""
    bindings: dict[str, int | list[int]] = {}
    for pair in pairs:
        match = BINDING.match(pair)
        if not match:
            raise UsageError(f"expected name=value, got {pair!r}")
        name, raw = match.groups()
        try:
            values = [int(item, 0) for item in raw.split(",")]
        except ValueError:
            raise UsageError(f"{name}: {raw!r} is not an integer") from None
        bindings[name] = values if "," in raw else values[0]
    return bindings


def parse_params(pairs: Iterable[str]) -> dict[str, Interval]:
    """``n=5`` or ``n=0..20`` pairs bounding HIR entry parameters."""
    params: dict[str, Interval] = {}
    for pair in pairs:
        name, _, raw = pair.partition("=")
        if not name or not raw:
            raise UsageError(f"expected name=value or name=lo..hi, got {pair!r}")
        span = SPAN.match(raw.strip())
        try:
            params[name.strip()] = Interval(int(span.group(1)), int(span.group(2))) if span else Interval.point(int(raw))
        except ValueError:
            raise UsageError(f"{name}: {raw!r} is not an integer or a range") from None
    return params


def render_table(headers: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Plain aligned columns; numbers right-aligned."""
    cells = [[str(value) for value in headers]]
    numeric = [False] * len(headers)
    for row in rows:
        cells.append([_cell(value) for value in row])
        for index, value in enumerate(row):
            numeric[index] = numeric[index] or isinstance(value, (int, float, Fraction))
    widths = [max(len(row[index]) for row in cells) for index in range(len(headers))]
    lines = []
    for position, row in enumerate(cells):
        parts = [
            value.rjust(width) if numeric[index] and position else value.ljust(width)
            for index, (value, width) in enumerate(zip(row, widths))
        ]
        lines.append("  ".join(parts).rstrip())
        if position == 0:
            lines.append("  ".join("-" * width for width in widths))
    return "\n".join(lines) + "\n"


def _cell(value: Any) -> str:
    if isinstance(value, (float, Fraction)):
        return f"{float(value):.3f}"
    return "" if value is None else str(value)


@dataclass
class TransparencyReport:
    """Everything known about one program's energy, checked for consistency."""

    program: str
    simulated: EnergyReport | None = None
    extrapolated: EnergyReport | None = None
    upper: EnergyBound | None = None
    lower: EnergyBound | None = None
    hir_upper: EnergyBound | None = None
    hir_lower: EnergyBound | None = None
    profile: StaticProfile | None = None
    cost_functions: Mapping[str, CostFunction] = field(default_factory=dict)
    distribution: EnergyDistribution | None = None
    budget: Fraction | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def within_budget(self) -> bool | None:
        if self.budget is None or self.upper is None:
            return None
        return self.upper.value <= self.budget

    def check(self) -> None:
        """Raise when a bound contradicts another bound or the simulated energy."""
        for lower, upper in ((self.lower, self.upper), (self.hir_lower, self.hir_upper)):
            if lower is not None and upper is not None and lower.value > upper.value:
                raise ReportConsistencyError(
                    f"{self.program}: lower bound {float(lower.value)} exceeds upper bound {float(upper.value)}"
                )
        if self.distribution is not None:
            lower, upper = self.lower, self.upper
            if lower is not None and not lower.idle_excluded and lower.value > self.distribution.min:
                raise ReportConsistencyError(
                    f"{self.program}: lower bound exceeds the cheapest run of the distribution"
                )
            if upper is not None and not upper.idle_excluded and self.distribution.max > upper.value:
                raise ReportConsistencyError(
                    f"{self.program}: the costliest run of the distribution exceeds the upper bound"
                )
        if self.simulated is None:
            return
        value = self.simulated.value
        for bound in (self.lower, self.hir_lower):
            if bound is not None and not bound.idle_excluded and bound.value > value:
                raise ReportConsistencyError(
                    f"{self.program}: lower bound {float(bound.value)} exceeds simulated {float(value)}"
                )
        for bound in (self.upper, self.hir_upper):
            if bound is not None and not bound.idle_excluded and value > bound.value:
                raise ReportConsistencyError(
                    f"{self.program}: simulated {float(value)} exceeds upper bound {float(bound.value)}"
                )

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {"program": self.program}
        if self.simulated is not None:
            data["simulated"] = self.simulated.to_dict()
        if self.extrapolated is not None:
            data["extrapolated"] = self.extrapolated.to_dict()
        bounds = {
            name: bound.to_dict()
            for name, bound in (
                ("isa_upper", self.upper),
                ("isa_lower", self.lower),
                ("hir_upper", self.hir_upper),
                ("hir_lower", self.hir_lower),
            )
            if bound is not None
        }
        if bounds:
            data["bounds"] = bounds
        if self.profile is not None:
            data["static_profile"] = self.profile.to_dict()
        if self.cost_functions:
            data["cost_functions"] = {name: cost.to_dict() for name, cost in sorted(self.cost_functions.items())}
        if self.distribution is not None:
            data["distribution"] = self.distribution.to_dict()
        if self.budget is not None:
            data["budget"] = {"budget_pj": float(self.budget), "within_budget": self.within_budget}
        if self.notes:
            data["notes"] = list(self.notes)
        return data

    def rows(self) -> list[tuple[str, float | None]]:
        rows: list[tuple[str, float | None]] = []
        for label, report in (("simulated", self.simulated), ("extrapolated", self.extrapolated)):
            if report is not None:
                rows.append((label, float(report.value)))
        for label, bound in (
            ("isa lower", self.lower),
            ("isa upper", self.upper),
            ("hir lower", self.hir_lower),
            ("hir upper", self.hir_upper),
        ):
            if bound is not None:
                rows.append((label, float(bound.value)))
        if self.distribution is not None:
            rows.append(("distribution mean", float(self.distribution.mean)))
        if self.budget is not None:
            rows.append(("budget", float(self.budget)))
        return rows


def build_report(
    source: LoadedProgram,
    model: EnergyModel,
    *,
    bindings: Mapping[str, int | list[int]] | None = None,
    params: ParamSpec | None = None,
    distribution: InputDistribution | None = None,
    n_threads: int = 1,
    budget: Fraction | None = None,
) -> TransparencyReport:
    report = TransparencyReport(program=source.name, budget=budget)
    if bindings is not None:
        inputs = source.inputs(bindings)
        trace = ensure_completed(run(source.program, inputs))
        report.simulated = trace_energy(model, trace)
        report.extrapolated = extrapolated_energy(model, trace.counts)

    try:
        report.upper = wcec(source.program, None, model, n_threads)
        report.lower = bcec(source.program, None, model, n_threads)
        report.profile = profile_from_bound(report.upper)
    except AnalysisError as error:
        report.notes.append(f"instruction-level bounds unavailable: {error}")

    if source.hir is not None and source.mapping is not None:
        costs = lift_model(model, source.program, source.mapping)
        try:
            report.hir_upper = hir_wcec(source.hir, costs, params)
            report.hir_lower = hir_bcec(source.hir, costs, params)
        except HirAnalysisError as error:
            report.notes.append(f"statement-level bounds unavailable: {error}")
        try:
            report.cost_functions = solve(extract_relations(source.hir, costs))
        except ParametricError as error:
            report.notes.append(f"cost functions unavailable: {error}")

    if distribution is not None:
        report.distribution = energy_distribution_exact(source.program, model, source.input_distribution(distribution))

    report.check()
    logger.info("Built transparency report for %s", source.name)
    return report
