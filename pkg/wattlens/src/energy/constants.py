from __future__ import annotations

from enum import Enum


class InstructionClass(str, Enum):
    ARITH = "arith"
    MEM = "mem"
    BRANCH = "branch"
    THREAD = "thread"
    CHAN = "chan"
    MISC = "misc"


class PowerSource(str, Enum):
    PROFILED = "profiled"
    ESTIMATED = "estimated"


class Monotonicity(str, Enum):
    NON_INCREASING = "non-increasing"
    NON_DECREASING = "non-decreasing"
    CONSTANT = "constant"


class Provenance(str, Enum):
    SIMULATED = "simulated"
    EXTRAPOLATED = "statistics-extrapolated"
    STATIC_BOUND = "static-bound"


PROFILEABLE_CLASSES = frozenset({InstructionClass.ARITH, InstructionClass.MEM})
VALID_ENCODING_BITS = frozenset({16, 32})
MAX_OPERAND_COUNT = 3
WORD_BITS = 32
