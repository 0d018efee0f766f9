from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from core.errors import WattlensError
from simulator.constants import Outcome


class SimulationError(WattlensError):
    """Base class for simulation errors."""


class InputError(SimulationError):
    """Raised when an input binding names no register or memory word."""


class MemoryAccessError(SimulationError):
    """Raised on a load or store outside the flat memory."""


class ThreadLimitError(SimulationError):
    """Raised when FORK would exceed the hardware thread limit."""


class CallDepthError(SimulationError):
    """Raised when the call stack of a thread grows past its limit."""


class FuelExhaustedError(SimulationError):
    """Raised by callers that need a run to finish within its fuel."""


class InconsistentCountsError(SimulationError):
    """Raised when per-thread statistics cannot come from one execution."""


@dataclass(frozen=True)
class TraceEvent:
    """One issue cycle. Multi-cycle instructions produce one event per cycle."""

    cycle: int
    tid: int
    opcode: str
    act: int
    function: str
    block: str
    stage: int = 0

    def to_dict(self) -> dict[str, int | str]:
        return {"c": self.cycle, "tid": self.tid, "op": self.opcode, "act": self.act}


@dataclass(frozen=True)
class PerThreadCounts:
    """Per-thread instruction statistics gathered without a full trace.

    ``issues`` counts issue cycles per opcode, ``active`` the cycles a thread
    was runnable, ``wall`` the cycles of the whole run.
    """

    issues: Mapping[int, Mapping[str, int]]
    active: Mapping[int, int]
    wall: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "issues",
            MappingProxyType(
                {tid: MappingProxyType(dict(sorted(ops.items()))) for tid, ops in sorted(self.issues.items())}
            ),
        )
        object.__setattr__(self, "active", MappingProxyType(dict(sorted(self.active.items()))))

    @property
    def threads(self) -> list[int]:
        return sorted(set(self.issues) | set(self.active))

    def issue_cycles(self, tid: int) -> int:
        return sum(self.issues.get(tid, {}).values())

    @property
    def total_active(self) -> int:
        return sum(self.active.values())

    def validate(self) -> None:
        for tid in self.threads:
            issued = self.issue_cycles(tid)
            active = self.active.get(tid, 0)
            if issued > active:
                raise InconsistentCountsError(
                    f"thread {tid} issued {issued} cycles but was active for {active}"
                )
            if active > self.wall:
                raise InconsistentCountsError(
                    f"thread {tid} active for {active} cycles, longer than the run ({self.wall})"
                )
        if sum(self.issue_cycles(tid) for tid in self.threads) > self.wall:
            raise InconsistentCountsError("more issue cycles than wall-clock cycles")

    def to_dict(self) -> dict:
        return {
            "issues": {str(tid): dict(ops) for tid, ops in self.issues.items()},
            "active": {str(tid): value for tid, value in self.active.items()},
            "wall": self.wall,
        }


@dataclass(frozen=True)
class Trace:
    outcome: Outcome
    total_cycles: int
    counts: PerThreadCounts
    events: tuple[TraceEvent, ...] = ()
    registers: tuple[int, ...] = ()
    memory: tuple[int, ...] = field(default=(), repr=False)
    recorded: bool = True

    @property
    def return_value(self) -> int | None:
        return self.registers[0] if self.registers else None

    @property
    def halted(self) -> bool:
        return self.outcome is Outcome.HALTED
