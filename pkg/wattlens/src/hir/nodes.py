from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union


@dataclass(frozen=True)
class Const:
    value: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Name:
    id: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Index:
    array: str
    index: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    function: str
    args: tuple["Expr", ...]
    line: int = field(default=0, compare=False)


Expr = Union[Const, Name, Index, Unary, Binary, Call]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Expr
    right: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VarDecl:
    sid: str
    name: str
    value: Expr | None
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Assign:
    sid: str
    name: str
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Store:
    sid: str
    array: str
    index: Expr
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class For:
    """``for var in lo..hi``: runs with var = lo, lo+1, ..., hi-1."""

    sid: str
    var: str
    lo: Expr
    hi: Expr
    body: tuple["Stmt", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class While:
    """A loop whose body runs at least ``bound_lo`` and at most ``bound_hi`` times."""

    sid: str
    cond: Compare
    bound_lo: Expr
    bound_hi: Expr
    body: tuple["Stmt", ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    sid: str
    cond: Compare
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Return:
    sid: str
    value: Expr
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class CallStmt:
    sid: str
    call: Call
    line: int = field(default=0, compare=False)


Stmt = Union[VarDecl, Assign, Store, For, While, If, Return, CallStmt]


@dataclass(frozen=True)
class ArrayDecl:
    name: str
    size: int
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class FuncDecl:
    name: str
    params: tuple[str, ...]
    body: tuple[Stmt, ...]
    line: int = field(default=0, compare=False)

    def statements(self) -> Iterator[Stmt]:
        yield from walk(self.body)


@dataclass(frozen=True)
class HirProgram:
    arrays: tuple[ArrayDecl, ...]
    functions: tuple[FuncDecl, ...]

    @property
    def entry(self) -> str:
        names = [function.name for function in self.functions]
        return "main" if "main" in names else names[0]

    def function(self, name: str) -> FuncDecl:
        for function in self.functions:
            if function.name == name:
                return function
        raise KeyError(name)

    def array_bases(self) -> dict[str, int]:
        """Word address of every array; arrays are laid out in declaration order from 0."""
        bases, address = {}, 0
        for array in self.arrays:
            bases[array.name] = address
            address += array.size
        return bases


def walk(statements: tuple[Stmt, ...]) -> Iterator[Stmt]:
    for statement in statements:
        yield statement
        if isinstance(statement, (For, While)):
            yield from walk(statement.body)
        elif isinstance(statement, If):
            yield from walk(statement.then)
            yield from walk(statement.orelse)


def expressions(statement: Stmt) -> Iterator[Expr]:
    """Expressions evaluated directly by ``statement``, not by nested statements."""
    if isinstance(statement, (VarDecl,)) and statement.value is not None:
        yield statement.value
    elif isinstance(statement, (Assign, Return)):
        yield statement.value
    elif isinstance(statement, Store):
        yield statement.index
        yield statement.value
    elif isinstance(statement, For):
        yield statement.lo
        yield statement.hi
    elif isinstance(statement, (While, If)):
        yield statement.cond.left
        yield statement.cond.right
    elif isinstance(statement, CallStmt):
        yield statement.call


def calls_in(expr: Expr) -> Iterator[Call]:
    if isinstance(expr, Call):
        for arg in expr.args:
            yield from calls_in(arg)
        yield expr
    elif isinstance(expr, Index):
        yield from calls_in(expr.index)
    elif isinstance(expr, Unary):
        yield from calls_in(expr.operand)
    elif isinstance(expr, Binary):
        yield from calls_in(expr.left)
        yield from calls_in(expr.right)
