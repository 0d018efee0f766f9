from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Mapping

from core.errors import WattlensError
from core.numbers import canonical
from energy.constants import (
    MAX_OPERAND_COUNT,
    VALID_ENCODING_BITS,
    InstructionClass,
    Monotonicity,
    PowerSource,
)


class ModelError(WattlensError):
    """Base class for energy model errors."""


class ModelParseError(ModelError):
    """Raised when a model file cannot be parsed."""


class ModelValidationError(ModelError):
    """Raised when a model violates one of its invariants."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class UnknownOpcodeError(ModelError):
    """Raised when an opcode has no entry in the model or ISA."""

    def __init__(self, opcode: str):
        self.opcode = opcode
        super().__init__(f"unknown opcode {opcode!r}")


class ThreadCountError(ModelError):
    """Raised when an active-thread count is outside 1..t_max."""


@dataclass(frozen=True)
class InstructionSpec:
    opcode: str
    operand_count: int
    encoding_bits: int
    mem_access: bool
    issue_cycles: int
    klass: InstructionClass

    def __post_init__(self) -> None:
        if not 0 <= self.operand_count <= MAX_OPERAND_COUNT:
            raise ModelValidationError(
                f"instructions[{self.opcode}].operand_count",
                f"must be within 0..{MAX_OPERAND_COUNT}, got {self.operand_count}",
            )
        if self.encoding_bits not in VALID_ENCODING_BITS:
            raise ModelValidationError(
                f"instructions[{self.opcode}].encoding_bits",
                f"must be 16 or 32, got {self.encoding_bits}",
            )
        if self.issue_cycles < 1:
            raise ModelValidationError(
                f"instructions[{self.opcode}].issue_cycles",
                f"must be >= 1, got {self.issue_cycles}",
            )

    @property
    def profileable(self) -> bool:
        return self.klass in (InstructionClass.ARITH, InstructionClass.MEM)

    def features(self) -> tuple[str, bool, int, int]:
        return (self.klass.value, self.mem_access, self.encoding_bits, self.operand_count)


def _spec(opcode: str, operands: int, bits: int, mem: bool, issue: int, klass: InstructionClass) -> InstructionSpec:
    return InstructionSpec(opcode, operands, bits, mem, issue, klass)


DEFAULT_ISA: Mapping[str, InstructionSpec] = MappingProxyType(
    {
        spec.opcode: spec
        for spec in (
            _spec("LDC", 2, 32, False, 1, InstructionClass.ARITH),
            _spec("ADD", 3, 16, False, 1, InstructionClass.ARITH),
            _spec("SUB", 3, 16, False, 1, InstructionClass.ARITH),
            _spec("MUL", 3, 16, False, 2, InstructionClass.ARITH),
            _spec("AND", 3, 16, False, 1, InstructionClass.ARITH),
            _spec("XOR", 3, 16, False, 1, InstructionClass.ARITH),
            _spec("SHL", 3, 16, False, 1, InstructionClass.ARITH),
            _spec("LDW", 3, 32, True, 1, InstructionClass.MEM),
            _spec("STW", 3, 32, True, 1, InstructionClass.MEM),
            _spec("BRT", 2, 16, False, 1, InstructionClass.BRANCH),
            _spec("JMP", 1, 16, False, 1, InstructionClass.BRANCH),
            _spec("CALL", 2, 32, False, 1, InstructionClass.BRANCH),
            _spec("RET", 0, 16, False, 1, InstructionClass.BRANCH),
            _spec("FORK", 2, 32, False, 1, InstructionClass.THREAD),
            _spec("OUT", 2, 16, False, 1, InstructionClass.CHAN),
            _spec("IN", 2, 16, False, 1, InstructionClass.CHAN),
            _spec("HALT", 0, 16, False, 1, InstructionClass.MISC),
        )
    }
)


@dataclass(frozen=True)
class InstructionPower:
    power: Fraction
    source: PowerSource = PowerSource.PROFILED

    def __post_init__(self) -> None:
        object.__setattr__(self, "power", canonical(self.power))
        object.__setattr__(self, "source", PowerSource(self.source))


@dataclass(frozen=True)
class EnergyModel:
    """Constants of the instruction-level energy model.

    Powers are in mW, the clock period in ns, ``o`` and ``m_t`` are
    dimensionless, so every energy computed from the model is in pJ.
    """

    t_clk: Fraction
    p_b: Fraction
    o: Fraction
    powers: Mapping[str, InstructionPower]
    m_t: Mapping[int, Fraction]
    t_max: int
    isa_meta: Mapping[str, InstructionSpec] = field(default=DEFAULT_ISA)

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_clk", canonical(self.t_clk))
        object.__setattr__(self, "p_b", canonical(self.p_b))
        object.__setattr__(self, "o", canonical(self.o))
        powers = {
            opcode: value if isinstance(value, InstructionPower) else InstructionPower(value)
            for opcode, value in self.powers.items()
        }
        object.__setattr__(self, "powers", MappingProxyType(dict(sorted(powers.items()))))
        object.__setattr__(
            self,
            "m_t",
            MappingProxyType({int(t): canonical(v) for t, v in sorted(self.m_t.items())}),
        )
        object.__setattr__(self, "isa_meta", MappingProxyType(dict(sorted(self.isa_meta.items()))))
        self._validate()

    def _validate(self) -> None:
        if self.t_clk <= 0:
            raise ModelValidationError("t_clk_ns", f"must be > 0, got {float(self.t_clk)}")
        if self.p_b < 0:
            raise ModelValidationError("p_b_mw", f"must be >= 0, got {float(self.p_b)}")
        if self.o <= 0:
            raise ModelValidationError("overhead", f"must be > 0, got {float(self.o)}")
        if self.t_max < 1:
            raise ModelValidationError("t_max", f"must be >= 1, got {self.t_max}")
        for t in range(1, self.t_max + 1):
            if t not in self.m_t:
                raise ModelValidationError("m_t", f"m_t gap at t={t}")
            if self.m_t[t] <= 0:
                raise ModelValidationError("m_t", f"m_t[{t}] must be > 0")
        extra = sorted(t for t in self.m_t if not 1 <= t <= self.t_max)
        if extra:
            raise ModelValidationError("m_t", f"entries beyond t_max at t={extra[0]}")
        if self.m_t_direction is None:
            raise ModelValidationError("m_t", "must be monotonically non-increasing or non-decreasing")
        for opcode, entry in self.powers.items():
            if entry.power < 0:
                raise ModelValidationError(f"instructions[{opcode}].power_mw", "must be >= 0")
            if opcode not in self.isa_meta:
                raise ModelValidationError(f"instructions[{opcode}]", "power without instruction metadata")
        for opcode in self.isa_meta:
            if opcode not in self.powers:
                raise ModelValidationError(f"instructions[{opcode}]", "metadata without power")

    @property
    def p_i(self) -> Mapping[str, Fraction]:
        return MappingProxyType({opcode: entry.power for opcode, entry in self.powers.items()})

    @property
    def m_t_direction(self) -> Monotonicity | None:
        values = [self.m_t[t] for t in range(1, self.t_max + 1) if t in self.m_t]
        pairs = list(zip(values, values[1:]))
        non_increasing = all(a >= b for a, b in pairs)
        non_decreasing = all(a <= b for a, b in pairs)
        if non_increasing and non_decreasing:
            return Monotonicity.CONSTANT
        if non_increasing:
            return Monotonicity.NON_INCREASING
        if non_decreasing:
            return Monotonicity.NON_DECREASING
        return None

    def spec(self, opcode: str) -> InstructionSpec:
        try:
            return self.isa_meta[opcode]
        except KeyError:
            raise UnknownOpcodeError(opcode) from None

    def power(self, opcode: str) -> Fraction:
        try:
            return self.powers[opcode].power
        except KeyError:
            raise UnknownOpcodeError(opcode) from None

    def estimated_opcodes(self) -> list[str]:
        return [op for op, entry in self.powers.items() if entry.source is PowerSource.ESTIMATED]

    def conservative_thread_level(self, n_threads: int, *, upper: bool) -> int:
        """Thread level in 1..n_threads with the highest (upper) or lowest per-instruction energy."""
        if not 1 <= n_threads <= self.t_max:
            raise ThreadCountError(f"thread count {n_threads} outside 1..{self.t_max}")
        direction = self.m_t_direction
        if direction is Monotonicity.CONSTANT:
            return 1
        grows = direction is Monotonicity.NON_DECREASING
        return n_threads if grows == upper else 1


@dataclass(frozen=True)
class ExecutionStats:
    """Program-dependent terms: N_{i,t}, N_idl and the total cycle count."""

    n_it: Mapping[tuple[str, int], int]
    n_idl: int = 0
    total_cycles: int | None = None

    def __post_init__(self) -> None:
        counts = {key: int(value) for key, value in sorted(self.n_it.items()) if value}
        for (opcode, t), value in counts.items():
            if value < 0:
                raise ValueError(f"negative count for ({opcode}, {t})")
            if t < 1:
                raise ThreadCountError(f"thread level {t} for {opcode} must be >= 1")
        if self.n_idl < 0:
            raise ValueError("idle cycle count must be >= 0")
        object.__setattr__(self, "n_it", MappingProxyType(counts))
        expected = self.n_idl + sum(counts.values())
        if self.total_cycles is None:
            object.__setattr__(self, "total_cycles", expected)
        elif self.total_cycles != expected:
            raise ValueError(
                f"total_cycles {self.total_cycles} != n_idl + sum(n_it) = {expected}"
            )

    @classmethod
    def zero(cls) -> "ExecutionStats":
        return cls(n_it={})

    @classmethod
    def from_counts(cls, counts: Iterable[tuple[str, int]], n_idl: int = 0) -> "ExecutionStats":
        return cls(n_it=Counter(counts), n_idl=n_idl)

    def __add__(self, other: "ExecutionStats") -> "ExecutionStats":
        merged = Counter(self.n_it)
        merged.update(other.n_it)
        return ExecutionStats(n_it=merged, n_idl=self.n_idl + other.n_idl)

    @property
    def max_thread_level(self) -> int:
        return max((t for _, t in self.n_it), default=0)

    def issues_of(self, opcode: str) -> int:
        return sum(value for (op, _), value in self.n_it.items() if op == opcode)

    def to_dict(self) -> dict:
        matrix: dict[str, dict[str, int]] = {}
        for (opcode, t), value in self.n_it.items():
            matrix.setdefault(opcode, {})[str(t)] = value
        return {
            "n_it": matrix,
            "n_idl": self.n_idl,
            "total_cycles": self.total_cycles,
        }
