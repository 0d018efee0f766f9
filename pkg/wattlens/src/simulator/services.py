from __future__ import annotations

import json
import logging
import math
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import IO

from energy.constants import Provenance
from energy.domain import EnergyModel, ExecutionStats
from energy.reports import IDLE_KEY, EnergyReport
from energy.services import energy, idle_energy, instruction_energy
from simulator.constants import Outcome
from simulator.domain import FuelExhaustedError, PerThreadCounts, SimulationError, Trace

logger = logging.getLogger(__name__)


def _round_half_up(value: Fraction) -> int:
    return math.floor(value + Fraction(1, 2))


def ensure_completed(trace: Trace) -> Trace:
    if trace.outcome is Outcome.FUEL_EXHAUSTED:
        raise FuelExhaustedError(f"run did not finish within {trace.total_cycles} cycles")
    return trace


def _require_events(trace: Trace) -> None:
    if not trace.recorded:
        raise SimulationError("trace was recorded in statistics mode and carries no events")


def stats_of(trace: Trace) -> ExecutionStats:
    """N_{i,t} from the events of a trace; every cycle without an event is idle."""
    _require_events(trace)
    counts = Counter((event.opcode, event.act) for event in trace.events)
    return ExecutionStats(
        n_it=counts,
        n_idl=trace.total_cycles - len(trace.events),
        total_cycles=trace.total_cycles,
    )


def trace_energy(model: EnergyModel, trace: Trace) -> EnergyReport:
    """Energy of a trace, attributed to the blocks and functions that issued it."""
    stats = stats_of(trace)
    value = energy(model, stats)

    per_site = Counter((event.function, event.block, event.opcode, event.act) for event in trace.events)
    per_block: dict[str, Fraction] = {}
    per_function: dict[str, Fraction] = {}
    for (function, block, opcode, act), count in per_site.items():
        cost = instruction_energy(model, opcode, act) * count
        key = f"{function}:{block}"
        per_block[key] = per_block.get(key, Fraction(0)) + cost
        per_function[function] = per_function.get(function, Fraction(0)) + cost
    if stats.n_idl:
        per_block[IDLE_KEY] = per_function[IDLE_KEY] = idle_energy(model, stats.n_idl)

    notes = () if trace.outcome is Outcome.HALTED else (f"run ended with outcome {trace.outcome.value}",)
    return EnergyReport(
        value=value,
        provenance=Provenance.SIMULATED,
        per_block=per_block,
        per_function=per_function,
        stats=stats,
        notes=notes,
    )


def extrapolate_stats(counts: PerThreadCounts, t_max: int) -> ExecutionStats:
    """Estimate N_{i,t} and N_idl from per-thread totals.

    All threads are assumed to overlap uniformly at one level, the rounded
    mean number of runnable threads per wall-clock cycle. Every wall-clock
    cycle without an issue is idle.
    """
    counts.validate()
    if counts.wall == 0:
        return ExecutionStats.zero()
    level = min(max(_round_half_up(Fraction(counts.total_active, counts.wall)), 1), t_max)
    n_it: Counter[tuple[str, int]] = Counter()
    for tid in counts.threads:
        for opcode, issued in counts.issues.get(tid, {}).items():
            n_it[(opcode, level)] += issued
    return ExecutionStats(n_it=n_it, n_idl=counts.wall - sum(n_it.values()), total_cycles=counts.wall)


def extrapolated_energy(model: EnergyModel, counts: PerThreadCounts) -> EnergyReport:
    stats = extrapolate_stats(counts, model.t_max)
    level = stats.max_thread_level
    return EnergyReport(
        value=energy(model, stats),
        provenance=Provenance.EXTRAPOLATED,
        stats=stats,
        notes=(f"all issue cycles assumed at {level} active thread(s)",) if level else (),
    )


def write_trace_jsonl(trace: Trace, stream: IO[str]) -> int:
    _require_events(trace)
    for event in trace.events:
        stream.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
    return len(trace.events)


def export_trace(trace: Trace, path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8") as stream:
        written = write_trace_jsonl(trace, stream)
    logger.info("Wrote %s trace events to %s", written, path)


def export_stats(stats: ExecutionStats, path: Path | str) -> None:
    Path(path).write_text(json.dumps(stats.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
