from __future__ import annotations

from enum import Enum

from energy.constants import InstructionClass


class OperandRegime(str, Enum):
    RANDOM = "random"
    CONSTRAINED = "constrained"


# Base powers grow with operand count and memory access.
DEFAULT_TRUE_POWERS_MW: dict[str, float] = {
    "LDC": 42.0,
    "ADD": 55.0,
    "SUB": 56.0,
    "MUL": 64.0,
    "AND": 50.0,
    "XOR": 53.0,
    "SHL": 58.0,
    "LDW": 72.0,
    "STW": 74.0,
    "BRT": 48.0,
    "JMP": 44.0,
    "CALL": 52.0,
    "RET": 46.0,
    "FORK": 60.0,
    "OUT": 57.0,
    "IN": 55.0,
    "HALT": 30.0,
}

DEFAULT_DATA_COEFF_BY_CLASS: dict[InstructionClass, float] = {
    InstructionClass.ARITH: 0.15,
    InstructionClass.MEM: 0.25,
    InstructionClass.BRANCH: 0.05,
    InstructionClass.THREAD: 0.05,
    InstructionClass.CHAN: 0.10,
    InstructionClass.MISC: 0.05,
}

DATA_COEFF_ENVELOPE = (0.05, 0.25)

DEFAULT_P_B_MW = 20.0
DEFAULT_OVERHEAD = 1.15
DEFAULT_T_CLK_NS = 2.5
DEFAULT_M_T = (1.0, 0.95, 0.91, 0.88, 0.86, 0.85, 0.84, 0.83)
