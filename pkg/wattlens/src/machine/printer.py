from __future__ import annotations

from machine.constants import OPERAND_SHAPES, Operand
from machine.domain import Instruction, Program

INDENT = "    "


def format_instruction(instruction: Instruction) -> str:
    registers = iter(([instruction.dst] if instruction.dst else []) + list(instruction.srcs))
    operands = []
    for kind in OPERAND_SHAPES[instruction.opcode]:
        if kind is Operand.REGISTER:
            operands.append(next(registers))
        elif kind is Operand.IMMEDIATE:
            operands.append(str(instruction.imm))
        elif kind is Operand.LABEL:
            operands.append(instruction.label)
        else:
            operands.append(instruction.callee)
    if not operands:
        return instruction.opcode
    return f"{instruction.opcode} {', '.join(operands)}"


def format_program(program: Program) -> str:
    """Print a program as EIR text that parses back to an equal Program."""
    lines = [f".entry {program.entry}"]
    for domain in program.domains:
        lines.append(f".domain {domain.name} {domain.lo}..{domain.hi}")
    for function in program.functions:
        lines.append("")
        lines.append(" ".join([".func", function.name, *function.params]))
        for block in function.blocks:
            lines.append(f"{block.label}:")
            for instruction in block.instructions:
                if instruction.bound is not None:
                    lines.append(f"{INDENT}@bound {instruction.bound}")
                lines.append(INDENT + format_instruction(instruction))
    return "\n".join(lines) + "\n"
