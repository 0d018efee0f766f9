from __future__ import annotations

from enum import Enum

from energy.domain import DEFAULT_ISA

REGISTER_COUNT = 12
MEMORY_WORDS = 1024
WORD_MASK = 0xFFFF_FFFF
SIGN_BIT = 0x8000_0000

REGISTERS = tuple(f"r{index}" for index in range(REGISTER_COUNT))
OPCODES = frozenset(DEFAULT_ISA)


class Operand(str, Enum):
    REGISTER = "r"
    IMMEDIATE = "i"
    LABEL = "l"
    FUNCTION = "f"


# Operand shapes, in source order. The first register of LDC/ALU/LDW/IN/CALL is the destination.
OPERAND_SHAPES: dict[str, tuple[Operand, ...]] = {
    "LDC": (Operand.REGISTER, Operand.IMMEDIATE),
    "ADD": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "SUB": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "MUL": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "AND": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "XOR": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "SHL": (Operand.REGISTER, Operand.REGISTER, Operand.REGISTER),
    "LDW": (Operand.REGISTER, Operand.REGISTER, Operand.IMMEDIATE),
    "STW": (Operand.REGISTER, Operand.REGISTER, Operand.IMMEDIATE),
    "BRT": (Operand.REGISTER, Operand.LABEL),
    "JMP": (Operand.LABEL,),
    "CALL": (Operand.REGISTER, Operand.FUNCTION),
    "RET": (),
    "FORK": (Operand.REGISTER, Operand.FUNCTION),
    "OUT": (Operand.REGISTER, Operand.IMMEDIATE),
    "IN": (Operand.REGISTER, Operand.IMMEDIATE),
    "HALT": (),
}

ALU_OPCODES = frozenset({"ADD", "SUB", "MUL", "AND", "XOR", "SHL"})
BRANCH_OPCODES = frozenset({"BRT", "JMP"})
TERMINATOR_OPCODES = frozenset({"BRT", "JMP", "RET", "HALT"})


class Terminator(str, Enum):
    FALLTHROUGH = "fallthrough"
    JUMP = "jump"
    BRANCH = "branch"
    RETURN = "return"
    HALT = "halt"


TERMINATOR_OF = {
    "BRT": Terminator.BRANCH,
    "JMP": Terminator.JUMP,
    "RET": Terminator.RETURN,
    "HALT": Terminator.HALT,
}
