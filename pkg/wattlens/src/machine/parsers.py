from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from core.errors import SourceError
from machine.constants import OPCODES, OPERAND_SHAPES, REGISTERS, Operand
from machine.domain import BasicBlock, Function, InputDomain, Instruction, LoopBound, Program

logger = logging.getLogger(__name__)

IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
LABEL_PREFIX = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_.]*)\s*:(.*)$")
RANGE = re.compile(r"^(-?\d+)\s*\.\.\s*(-?\d+)$")
ANONYMOUS_LABEL = "_b{index}"


class EirError(SourceError):
    """Base class for EIR program errors."""


class EirSyntaxError(EirError):
    """Raised on lexical or syntax errors."""


class EirOpcodeError(EirError):
    """Raised when an instruction names an unknown opcode."""


class OperandError(EirError):
    """Raised when operands do not match the opcode's shape."""


class UndefinedLabelError(EirError):
    """Raised when a branch targets a label outside its function."""

    def __init__(self, label: str, *, line: int | None = None):
        self.label = label
        super().__init__(f"undefined label {label!r}", line=line)


class UndefinedFunctionError(EirError):
    """Raised when a call, fork or entry names an unknown function."""


@dataclass
class _FunctionBuilder:
    name: str
    params: tuple[str, ...]
    line: int
    blocks: list[tuple[str | None, list[Instruction], int]] = field(default_factory=list)
    current: list[Instruction] = field(default_factory=list)
    current_label: str | None = None
    current_line: int = 0

    def start_label(self, label: str, line: int) -> None:
        if self.current_label is not None and not self.current:
            raise EirSyntaxError(f"label {self.current_label!r} has no instructions", line=line)
        self.close_block()
        self.current_label = label
        self.current_line = line

    def add(self, instruction: Instruction, line: int) -> None:
        if not self.current:
            self.current_line = self.current_line if self.current_label is not None else line
        self.current.append(instruction)
        if instruction.is_terminator:
            self.close_block()

    def close_block(self) -> None:
        if self.current:
            self.blocks.append((self.current_label, self.current, self.current_line))
        self.current = []
        self.current_label = None

    def build(self) -> Function:
        if self.current_label is not None and not self.current:
            raise EirSyntaxError(f"label {self.current_label!r} has no instructions", line=self.current_line)
        self.close_block()
        if not self.blocks:
            raise EirSyntaxError(f"function {self.name!r} has no instructions", line=self.line)
        taken = {label for label, _, _ in self.blocks if label is not None}
        labels: list[str] = []
        counter = 0
        for label, _, line in self.blocks:
            if label is None:
                while ANONYMOUS_LABEL.format(index=counter) in taken:
                    counter += 1
                label = ANONYMOUS_LABEL.format(index=counter)
                taken.add(label)
            elif label in labels:
                raise EirSyntaxError(f"duplicate label {label!r}", line=line)
            labels.append(label)
        blocks = tuple(
            BasicBlock(label=label, instructions=tuple(instructions), line=line)
            for label, (_, instructions, line) in zip(labels, self.blocks)
        )
        function = Function(name=self.name, params=self.params, blocks=blocks, line=self.line)
        last = blocks[-1]
        if not last.last.is_terminator:
            raise EirSyntaxError(f"function {self.name!r} falls off its end", line=last.last.line)
        return function


def _strip_comment(line: str) -> str:
    return line.split(";", 1)[0].rstrip()


def _column(raw: str, token: str) -> int:
    position = raw.find(token)
    return position + 1 if position >= 0 else 1


def _parse_int(token: str, *, line: int, column: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise EirSyntaxError(f"expected an integer, got {token!r}", line=line, column=column) from None


def _parse_range(text: str, *, line: int, column: int) -> tuple[int, int]:
    match = RANGE.match(text.strip())
    if match:
        return int(match.group(1)), int(match.group(2))
    value = _parse_int(text.strip(), line=line, column=column)
    return 0, value


def _parse_instruction(text: str, raw: str, line: int, bound: LoopBound | None) -> Instruction:
    parts = text.strip().split(None, 1)
    opcode = parts[0].upper()
    if opcode not in OPCODES:
        raise EirOpcodeError(f"unknown opcode {parts[0]!r}", line=line, column=_column(raw, parts[0]))
    operands = [token.strip() for token in parts[1].split(",")] if len(parts) > 1 else []
    if operands and any(not token for token in operands):
        raise EirSyntaxError("empty operand", line=line, column=_column(raw, ","))
    shape = OPERAND_SHAPES[opcode]
    if len(operands) != len(shape):
        raise OperandError(
            f"{opcode} expects {len(shape)} operand(s), got {len(operands)}",
            line=line,
            column=_column(raw, parts[0]),
        )

    registers: list[str] = []
    imm: int | None = None
    label: str | None = None
    callee: str | None = None
    for token, kind in zip(operands, shape):
        column = _column(raw, token)
        if kind is Operand.REGISTER:
            if token.lower() not in REGISTERS:
                raise OperandError(f"{opcode}: expected a register, got {token!r}", line=line, column=column)
            registers.append(token.lower())
        elif kind is Operand.IMMEDIATE:
            imm = _parse_int(token, line=line, column=column)
        elif not IDENTIFIER.match(token):
            raise OperandError(f"{opcode}: expected a name, got {token!r}", line=line, column=column)
        elif kind is Operand.LABEL:
            label = token
        else:
            callee = token

    if bound is not None and opcode not in ("BRT", "JMP"):
        raise EirSyntaxError("@bound must precede a BRT or JMP", line=line)

    dst: str | None = None
    srcs: tuple[str, ...] = ()
    if opcode in ("LDC", "LDW", "IN") or opcode in ("ADD", "SUB", "MUL", "AND", "XOR", "SHL"):
        dst, srcs = registers[0], tuple(registers[1:])
    elif opcode in ("CALL", "FORK"):
        dst = registers[0]
    else:
        srcs = tuple(registers)
    return Instruction(
        opcode=opcode,
        dst=dst,
        srcs=srcs,
        imm=imm,
        label=label,
        callee=callee,
        bound=bound,
        line=line,
    )


def parse_program(text: str) -> Program:
    """Parse EIR assembly text into a validated Program."""
    builders: list[_FunctionBuilder] = []
    current: _FunctionBuilder | None = None
    entry: str | None = None
    domains: list[InputDomain] = []
    pending_bound: tuple[LoopBound, int] | None = None

    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).strip()
        if not stripped:
            continue

        if stripped.startswith("."):
            directive, _, rest = stripped.partition(" ")
            rest = rest.strip()
            if directive == ".func":
                tokens = [token for token in re.split(r"[\s,]+", rest) if token]
                if not tokens or not IDENTIFIER.match(tokens[0]):
                    raise EirSyntaxError(".func needs a function name", line=number)
                for param in tokens[1:]:
                    if param.lower() not in REGISTERS:
                        raise OperandError(f"parameter {param!r} is not a register", line=number)
                params = tuple(param.lower() for param in tokens[1:])
                if params != REGISTERS[: len(params)]:
                    raise OperandError("parameters must be r0, r1, ... in order", line=number)
                if pending_bound is not None:
                    raise EirSyntaxError("@bound must precede a BRT or JMP", line=pending_bound[1])
                current = _FunctionBuilder(name=tokens[0], params=params, line=number)
                builders.append(current)
            elif directive == ".entry":
                if not IDENTIFIER.match(rest):
                    raise EirSyntaxError(".entry needs a function name", line=number)
                entry = rest
            elif directive == ".domain":
                name, _, span = rest.partition(" ")
                lo, hi = _parse_range(span, line=number, column=_column(raw, span.strip() or name))
                if hi < lo:
                    raise EirSyntaxError(f"empty domain {lo}..{hi}", line=number)
                domains.append(InputDomain(name=name.strip(), lo=lo, hi=hi))
            else:
                raise EirSyntaxError(f"unknown directive {directive!r}", line=number, column=_column(raw, directive))
            continue

        if stripped.startswith("@bound"):
            if pending_bound is not None:
                raise EirSyntaxError("two @bound annotations for one branch", line=number)
            lo, hi = _parse_range(stripped[len("@bound"):], line=number, column=_column(raw, "@bound") + 7)
            if lo < 0 or hi < lo:
                raise EirSyntaxError(f"invalid loop bound {lo}..{hi}", line=number)
            pending_bound = (LoopBound(lo, hi), number)
            continue

        match = LABEL_PREFIX.match(stripped)
        if current is None:
            if match is None:
                raise EirSyntaxError("instruction outside of a .func", line=number)
            # A label before any .func opens a function of that name without parameters.
            current = _FunctionBuilder(name=match.group(1), params=(), line=number)
            builders.append(current)
        if match:
            if pending_bound is not None:
                raise EirSyntaxError("@bound must precede a BRT or JMP", line=pending_bound[1])
            current.start_label(match.group(1), number)
            stripped = match.group(2).strip()
            if not stripped:
                continue

        bound = pending_bound[0] if pending_bound else None
        pending_bound = None
        current.add(_parse_instruction(stripped, raw, number, bound), number)

    if pending_bound is not None:
        raise EirSyntaxError("@bound must precede a BRT or JMP", line=pending_bound[1])
    if not builders:
        raise EirSyntaxError("program has no functions", line=1)

    functions = []
    for builder in builders:
        if any(function.name == builder.name for function in functions):
            raise EirSyntaxError(f"duplicate function {builder.name!r}", line=builder.line)
        functions.append(builder.build())

    names = {function.name for function in functions}
    if entry is None:
        entry = "main" if "main" in names else functions[0].name
    if entry not in names:
        raise UndefinedFunctionError(f"entry function {entry!r} is not defined")
    _check_references(functions, names)

    program = Program(functions=tuple(functions), entry=entry, domains=tuple(domains))
    logger.info("Parsed EIR program with %s functions (entry %s)", len(functions), entry)
    return program


def _check_references(functions: list[Function], names: set[str]) -> None:
    for function in functions:
        labels = {block.label for block in function.blocks}
        for _, _, instruction in function.instructions():
            if instruction.label is not None and instruction.label not in labels:
                raise UndefinedLabelError(instruction.label, line=instruction.line)
            if instruction.callee is not None and instruction.callee not in names:
                raise UndefinedFunctionError(
                    f"undefined function {instruction.callee!r}", line=instruction.line
                )


def parse_file(path: Path | str) -> Program:
    return parse_program(Path(path).read_text(encoding="utf-8"))
