from __future__ import annotations

from typing import Mapping

import numpy as np

from core.conf import default_seed, setting
from core.errors import WattlensError
from energy.domain import DEFAULT_ISA, InstructionSpec
from machine.domain import Program
from machine.parsers import parse_program
from profiler.constants import ADDRESS_SPAN, IMMEDIATE_LIMIT, KERNEL_WORKER, SETUP_REGISTERS


class ProfilingError(WattlensError):
    """Base class for profiling errors."""


class UnprofileableOpcodeError(ProfilingError):
    """Raised for opcodes that cannot be looped in a steady-state kernel."""

    def __init__(self, opcode: str):
        self.opcode = opcode
        super().__init__(f"{opcode} is unprofileable: only arith and mem instructions run in kernels")


def _check(opcode: str, isa_meta: Mapping[str, InstructionSpec]) -> None:
    spec = isa_meta.get(opcode)
    if spec is None:
        raise ProfilingError(f"unknown opcode {opcode!r}")
    if not spec.profileable:
        raise UnprofileableOpcodeError(opcode)


def _body_line(opcode: str, rng: np.random.Generator) -> str:
    base, value = SETUP_REGISTERS
    if opcode == "LDC":
        return f"LDC r3, {int(rng.integers(0, IMMEDIATE_LIMIT))}"
    if opcode == "LDW":
        return f"LDW r3, {base}, {int(rng.integers(0, ADDRESS_SPAN))}"
    if opcode == "STW":
        return f"STW {value}, {base}, {int(rng.integers(0, ADDRESS_SPAN))}"
    return f"{opcode} r3, {base}, {value}"


def kernel_warmup(n_threads: int = 1, warmup: int | None = None) -> int:
    """Cycles until every thread of a kernel has forked and entered its body."""
    base = setting("WATTLENS_PROFILE_WARMUP", 64) if warmup is None else warmup
    return base + n_threads * (n_threads + 4)


def kernel_length(n_threads: int = 1, warmup: int | None = None, duration: int | None = None) -> int:
    """Body length that keeps every thread inside its body for a full measurement."""
    window = setting("WATTLENS_PROFILE_DURATION", 4096) if duration is None else duration
    return kernel_warmup(n_threads, warmup) + window


def generate_pair_kernel(
    first: str,
    second: str,
    n_threads: int = 1,
    *,
    length: int | None = None,
    seed: int | None = None,
    t_max: int | None = None,
    isa_meta: Mapping[str, InstructionSpec] = DEFAULT_ISA,
) -> Program:
    """Kernel of ``n_threads`` lockstep threads alternating ``first`` and ``second``.

    ``main`` forks the other workers and then runs a worker itself, so every
    thread executes the same straight body before its closing jump.
    """
    _check(first, isa_meta)
    _check(second, isa_meta)
    limit = t_max if t_max is not None else setting("WATTLENS_T_MAX", 8)
    if not 1 <= n_threads <= limit:
        raise ProfilingError(f"thread count {n_threads} outside 1..{limit}")

    rng = np.random.default_rng(default_seed() if seed is None else seed)
    base, value = SETUP_REGISTERS
    lines = [
        ".entry main",
        ".func main",
        *[f"    FORK r0, {KERNEL_WORKER}" for _ in range(n_threads - 1)],
        f"    CALL r0, {KERNEL_WORKER}",
        "    HALT",
        f".func {KERNEL_WORKER}",
        f"    LDC {base}, {int(rng.integers(0, ADDRESS_SPAN))}",
        f"    LDC {value}, {int(rng.integers(0, IMMEDIATE_LIMIT))}",
        "body:",
    ]
    total = length if length is not None else kernel_length(n_threads)
    for index in range(total):
        lines.append("    " + _body_line(first if index % 2 == 0 else second, rng))
    lines.append("    JMP body")
    return parse_program("\n".join(lines) + "\n")


def generate_kernel(opcode: str, n_threads: int = 1, **options) -> Program:
    return generate_pair_kernel(opcode, opcode, n_threads, **options)


def generate_idle_kernel() -> Program:
    """A kernel whose only thread blocks forever, leaving the device at base power."""
    return parse_program(".func main\n    IN r0, 0\n    HALT\n")
