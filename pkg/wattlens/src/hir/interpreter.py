from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

from hir.constants import BINARY_OPCODES
from hir.nodes import (
    Assign,
    Binary,
    Call,
    CallStmt,
    Compare,
    Const,
    Expr,
    For,
    HirProgram,
    If,
    Index,
    Name,
    Return,
    Stmt,
    Store,
    Unary,
    VarDecl,
    While,
)
from hir.parsers import HirError
from machine.constants import MEMORY_WORDS, SIGN_BIT, WORD_MASK
from simulator.constants import MAX_CALL_DEPTH
from simulator.engine import ALU

logger = logging.getLogger(__name__)


class HirRuntimeError(HirError):
    """Raised when a HIR program faults while being interpreted."""


class _Returned(Exception):
    def __init__(self, value: int):
        self.value = value


def less_than(a: int, b: int) -> bool:
    """Comparison used by compiled code: the sign bit of the 32-bit difference."""
    return bool(((a - b) & WORD_MASK) & SIGN_BIT)


def holds(op: str, a: int, b: int) -> bool:
    if op == "<":
        return less_than(a, b)
    if op == ">":
        return less_than(b, a)
    if op == "<=":
        return not less_than(b, a)
    if op == ">=":
        return not less_than(a, b)
    if op == "==":
        return a == b
    return a != b


def fold(op: str, a: int, b: int) -> int:
    return ALU[BINARY_OPCODES[op]](a & WORD_MASK, b & WORD_MASK) & WORD_MASK


@dataclass
class HirResult:
    value: int
    memory: list[int]

    def array(self, program: HirProgram, name: str) -> list[int]:
        base = program.array_bases()[name]
        size = next(array.size for array in program.arrays if array.name == name)
        return self.memory[base:base + size]


class Interpreter:
    """Reference semantics for HIR: 32-bit wrapping words over the compiled memory layout."""

    def __init__(self, program: HirProgram):
        self.program = program
        self.bases = program.array_bases()
        self.memory = [0] * MEMORY_WORDS
        self.depth = 0

    def call(self, name: str, args: Sequence[int]) -> int:
        function = self.program.function(name)
        if self.depth >= MAX_CALL_DEPTH:
            raise HirRuntimeError(f"call depth exceeds {MAX_CALL_DEPTH} in {name}")
        self.depth += 1
        frame = {param: value & WORD_MASK for param, value in zip(function.params, args)}
        try:
            self.block(function.body, frame)
        except _Returned as returned:
            return returned.value
        finally:
            self.depth -= 1
        return 0

    def block(self, statements: tuple[Stmt, ...], frame: dict[str, int]) -> None:
        for statement in statements:
            self.statement(statement, frame)

    def statement(self, statement: Stmt, frame: dict[str, int]) -> None:
        if isinstance(statement, VarDecl):
            if statement.value is not None:
                frame[statement.name] = self.expression(statement.value, frame)
            else:
                frame.setdefault(statement.name, 0)
        elif isinstance(statement, Assign):
            frame[statement.name] = self.expression(statement.value, frame)
        elif isinstance(statement, Store):
            index = self.expression(statement.index, frame)
            value = self.expression(statement.value, frame)
            self.memory[self.address(statement.array, index, statement.line)] = value
        elif isinstance(statement, For):
            frame[statement.var] = self.expression(statement.lo, frame)
            hi = self.expression(statement.hi, frame)
            while less_than(frame[statement.var], hi):
                self.block(statement.body, frame)
                frame[statement.var] = (frame[statement.var] + 1) & WORD_MASK
        elif isinstance(statement, While):
            while self.condition(statement.cond, frame):
                self.block(statement.body, frame)
        elif isinstance(statement, If):
            branch = statement.then if self.condition(statement.cond, frame) else statement.orelse
            self.block(branch, frame)
        elif isinstance(statement, Return):
            raise _Returned(self.expression(statement.value, frame))
        elif isinstance(statement, CallStmt):
            self.expression(statement.call, frame)

    def condition(self, cond: Compare, frame: dict[str, int]) -> bool:
        return holds(cond.op, self.expression(cond.left, frame), self.expression(cond.right, frame))

    def address(self, array: str, index: int, line: int) -> int:
        address = (self.bases[array] + index) & WORD_MASK
        if address >= MEMORY_WORDS:
            raise HirRuntimeError(f"{array}[{index}] is outside memory", line=line)
        return address

    def expression(self, expr: Expr, frame: dict[str, int]) -> int:
        if isinstance(expr, Const):
            return expr.value & WORD_MASK
        if isinstance(expr, Name):
            return frame.get(expr.id, 0)
        if isinstance(expr, Index):
            index = self.expression(expr.index, frame)
            return self.memory[self.address(expr.array, index, expr.line)]
        if isinstance(expr, Unary):
            return -self.expression(expr.operand, frame) & WORD_MASK
        if isinstance(expr, Binary):
            left = self.expression(expr.left, frame)
            return fold(expr.op, left, self.expression(expr.right, frame))
        if isinstance(expr, Call):
            return self.call(expr.function, [self.expression(arg, frame) for arg in expr.args])
        raise HirRuntimeError(f"cannot evaluate {expr!r}")


def interpret(program: HirProgram, inputs: Mapping[str, int | Sequence[int]] | None = None) -> HirResult:
    """Run the entry function; ``inputs`` names entry parameters and array contents."""
    interpreter = Interpreter(program)
    inputs = dict(inputs or {})
    entry = program.function(program.entry)
    for name, value in inputs.items():
        if name in interpreter.bases and not isinstance(value, int):
            for offset, item in enumerate(value):
                interpreter.memory[interpreter.address(name, offset, 0)] = int(item) & WORD_MASK
        elif name not in entry.params:
            raise HirRuntimeError(f"unknown input {name!r}")
    args = [int(inputs.get(param, 0)) for param in entry.params]
    value = interpreter.call(entry.name, args)
    logger.debug("Interpreted %s -> %s", entry.name, value)
    return HirResult(value=value, memory=interpreter.memory)
