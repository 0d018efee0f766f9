from __future__ import annotations

import logging

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
from machine.constants import MEMORY_WORDS

logger = logging.getLogger(__name__)


class HirTypeError(HirError):
    """Raised when names, arities or array uses do not check."""


class _Scope:
    def __init__(self, parent: "_Scope | None" = None):
        self.parent = parent
        self.names: set[str] = set()

    def visible(self, name: str) -> bool:
        scope: _Scope | None = self
        while scope is not None:
            if name in scope.names:
                return True
            scope = scope.parent
        return False


class Checker:
    def __init__(self, program: HirProgram):
        self.program = program
        self.arrays = {array.name: array for array in program.arrays}
        self.arities: dict[str, int] = {}
        self.iterators: set[str] = set()

    def check(self) -> None:
        seen: set[str] = set()
        for array in self.program.arrays:
            if array.name in seen:
                raise HirTypeError(f"array {array.name!r} declared twice", line=array.line)
            seen.add(array.name)
            if array.size < 1:
                raise HirTypeError(f"array {array.name!r} must have at least one element", line=array.line)
        words = sum(array.size for array in self.program.arrays)
        if words > MEMORY_WORDS:
            raise HirTypeError(f"arrays need {words} words, memory has {MEMORY_WORDS}")
        for function in self.program.functions:
            if function.name in self.arities:
                raise HirTypeError(f"function {function.name!r} defined twice", line=function.line)
            if function.name in self.arrays:
                raise HirTypeError(f"{function.name!r} is both a function and an array", line=function.line)
            self.arities[function.name] = len(function.params)
        for function in self.program.functions:
            scope = _Scope()
            for param in function.params:
                self.declare(scope, param, function.line)
            self.iterators = set()
            self.block(function.body, scope)

    def declare(self, scope: _Scope, name: str, line: int) -> None:
        if name in self.arrays or name in self.arities:
            raise HirTypeError(f"{name!r} already names an array or function", line=line)
        if scope.visible(name):
            raise HirTypeError(f"{name!r} is already declared", line=line)
        scope.names.add(name)

    def block(self, statements: tuple[Stmt, ...], parent: _Scope) -> None:
        scope = _Scope(parent)
        for statement in statements:
            self.statement(statement, scope)

    def statement(self, statement: Stmt, scope: _Scope) -> None:
        line = statement.line
        if isinstance(statement, VarDecl):
            if statement.value is not None:
                self.expression(statement.value, scope)
            self.declare(scope, statement.name, line)
        elif isinstance(statement, Assign):
            self.scalar(statement.name, scope, line)
            if statement.name in self.iterators:
                raise HirTypeError(f"loop variable {statement.name!r} cannot be assigned", line=line)
            self.expression(statement.value, scope)
        elif isinstance(statement, Store):
            self.array(statement.array, line)
            self.expression(statement.index, scope)
            self.expression(statement.value, scope)
        elif isinstance(statement, For):
            self.expression(statement.lo, scope)
            self.expression(statement.hi, scope)
            inner = _Scope(scope)
            self.declare(inner, statement.var, line)
            self.iterators.add(statement.var)
            self.block(statement.body, inner)
            self.iterators.discard(statement.var)
        elif isinstance(statement, While):
            self.condition(statement.cond, scope)
            self.expression(statement.bound_lo, scope)
            self.expression(statement.bound_hi, scope)
            self.block(statement.body, scope)
        elif isinstance(statement, If):
            self.condition(statement.cond, scope)
            self.block(statement.then, scope)
            self.block(statement.orelse, scope)
        elif isinstance(statement, Return):
            self.expression(statement.value, scope)
        elif isinstance(statement, CallStmt):
            self.expression(statement.call, scope)

    def condition(self, cond: Compare, scope: _Scope) -> None:
        self.expression(cond.left, scope)
        self.expression(cond.right, scope)

    def scalar(self, name: str, scope: _Scope, line: int) -> None:
        if name in self.arrays:
            raise HirTypeError(f"array {name!r} used as a scalar", line=line)
        if not scope.visible(name):
            raise HirTypeError(f"undeclared variable {name!r}", line=line)

    def array(self, name: str, line: int) -> None:
        if name not in self.arrays:
            raise HirTypeError(f"{name!r} is not an array", line=line)

    def expression(self, expr: Expr, scope: _Scope) -> None:
        if isinstance(expr, Const):
            return
        if isinstance(expr, Name):
            self.scalar(expr.id, scope, expr.line)
        elif isinstance(expr, Index):
            self.array(expr.array, expr.line)
            self.expression(expr.index, scope)
        elif isinstance(expr, Unary):
            self.expression(expr.operand, scope)
        elif isinstance(expr, Binary):
            self.expression(expr.left, scope)
            self.expression(expr.right, scope)
        elif isinstance(expr, Call):
            if expr.function not in self.arities:
                raise HirTypeError(f"call to undefined function {expr.function!r}", line=expr.line)
            expected = self.arities[expr.function]
            if len(expr.args) != expected:
                raise HirTypeError(
                    f"{expr.function} takes {expected} argument(s), got {len(expr.args)}", line=expr.line
                )
            for arg in expr.args:
                self.expression(arg, scope)


def check_program(program: HirProgram) -> HirProgram:
    """Validate ``program`` and return it unchanged."""
    Checker(program).check()
    logger.debug("Checked HIR program entry=%s", program.entry)
    return program
