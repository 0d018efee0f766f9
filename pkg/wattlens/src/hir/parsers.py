from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from core.errors import SourceError
from hir.constants import KEYWORDS, RELATIONS
from hir.nodes import (
    ArrayDecl,
    Assign,
    Binary,
    Call,
    CallStmt,
    Compare,
    Const,
    Expr,
    For,
    FuncDecl,
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

logger = logging.getLogger(__name__)

TOKEN = re.compile(
    r"""
    (?P<space>[ \t\r]+)
    |(?P<newline>\n)
    |(?P<comment>//[^\n]*)
    |(?P<number>0[xX][0-9A-Fa-f]+|\d+)
    |(?P<name>[A-Za-z_][A-Za-z0-9_]*)
    |(?P<annotation>@[A-Za-z_]+)
    |(?P<symbol>\.\.|<<|<=|>=|==|!=|[-+*&^<>=(){}\[\],;])
    """,
    re.VERBOSE,
)

# Binding strength of binary operators, loosest first.
PRECEDENCE = (("^",), ("&",), ("<<",), ("+", "-"), ("*",))


class HirError(SourceError):
    """Base class for HIR program errors."""


class HirSyntaxError(HirError):
    """Raised on lexical or syntax errors in HIR source."""


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, position = 1, 0, 0
    while position < len(text):
        match = TOKEN.match(text, position)
        if match is None:
            raise HirSyntaxError(
                f"unexpected character {text[position]!r}", line=line, column=position - line_start + 1
            )
        kind = match.lastgroup
        value = match.group()
        column = position - line_start + 1
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind == "name" and value in KEYWORDS:
            tokens.append(Token("keyword", value, line, column))
        elif kind not in ("space", "comment"):
            tokens.append(Token(kind, value, line, column))
        position = match.end()
    tokens.append(Token("end", "", line, position - line_start + 1))
    return tokens


class Parser:
    """Recursive-descent parser; statement ids are numbered in source order per function."""

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.position = 0
        self.function = ""
        self.counter = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.position]

    def error(self, message: str, token: Token | None = None) -> HirSyntaxError:
        token = token or self.current
        return HirSyntaxError(message, line=token.line, column=token.column)

    def check(self, text: str) -> bool:
        token = self.current
        return token.kind in ("symbol", "keyword", "annotation") and token.text == text

    def accept(self, text: str) -> bool:
        if self.check(text):
            self.position += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.current
        if not self.check(text):
            found = token.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        self.position += 1
        return token

    def name(self) -> Token:
        token = self.current
        if token.kind != "name":
            raise self.error(f"expected a name, found {token.text or 'end of input'!r}")
        self.position += 1
        return token

    def number(self) -> int:
        token = self.current
        if token.kind != "number":
            raise self.error(f"expected a number, found {token.text or 'end of input'!r}")
        self.position += 1
        return int(token.text, 0)

    def next_sid(self) -> str:
        sid = f"{self.function}:{self.counter}"
        self.counter += 1
        return sid

    def program(self) -> HirProgram:
        arrays: list[ArrayDecl] = []
        functions: list[FuncDecl] = []
        while self.current.kind != "end":
            if self.check("array"):
                arrays.append(self.array())
            elif self.check("func"):
                functions.append(self.func())
            else:
                raise self.error(f"expected 'array' or 'func', found {self.current.text!r}")
        if not functions:
            raise HirSyntaxError("program defines no function", line=1)
        return HirProgram(arrays=tuple(arrays), functions=tuple(functions))

    def array(self) -> ArrayDecl:
        line = self.expect("array").line
        name = self.name().text
        self.expect("[")
        size = self.number()
        self.expect("]")
        self.expect(";")
        return ArrayDecl(name, size, line)

    def func(self) -> FuncDecl:
        line = self.expect("func").line
        name = self.name().text
        self.function, self.counter = name, 0
        self.expect("(")
        params: list[str] = []
        if not self.check(")"):
            params.append(self.name().text)
            while self.accept(","):
                params.append(self.name().text)
        self.expect(")")
        return FuncDecl(name, tuple(params), self.block(), line)

    def block(self) -> tuple[Stmt, ...]:
        self.expect("{")
        statements: list[Stmt] = []
        while not self.accept("}"):
            if self.current.kind == "end":
                raise self.error("unterminated block")
            statements.append(self.statement())
        return tuple(statements)

    def statement(self) -> Stmt:
        token = self.current
        line = token.line
        if self.accept("var"):
            sid = self.next_sid()
            name = self.name().text
            value = self.expression() if self.accept("=") else None
            self.expect(";")
            return VarDecl(sid, name, value, line)
        if self.accept("for"):
            sid = self.next_sid()
            var = self.name().text
            self.expect("in")
            lo = self.expression()
            self.expect("..")
            hi = self.expression()
            return For(sid, var, lo, hi, self.block(), line)
        if self.accept("while"):
            sid = self.next_sid()
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            self.expect("@bound")
            bound_lo = bound_hi = self.expression()
            if self.accept(".."):
                bound_hi = self.expression()
            else:
                bound_lo = Const(0, line)
            return While(sid, cond, bound_lo, bound_hi, self.block(), line)
        if self.accept("if"):
            sid = self.next_sid()
            self.expect("(")
            cond = self.condition()
            self.expect(")")
            then = self.block()
            orelse: tuple[Stmt, ...] = ()
            if self.accept("else"):
                orelse = (self.statement(),) if self.check("if") else self.block()
            return If(sid, cond, then, orelse, line)
        if self.accept("return"):
            sid = self.next_sid()
            value = self.expression()
            self.expect(";")
            return Return(sid, value, line)
        if token.kind == "name":
            sid = self.next_sid()
            name = self.name().text
            if self.check("("):
                call = self.call(name, line)
                self.expect(";")
                return CallStmt(sid, call, line)
            if self.accept("["):
                index = self.expression()
                self.expect("]")
                self.expect("=")
                value = self.expression()
                self.expect(";")
                return Store(sid, name, index, value, line)
            self.expect("=")
            value = self.expression()
            self.expect(";")
            return Assign(sid, name, value, line)
        raise self.error(f"unexpected {token.text or 'end of input'!r}")

    def condition(self) -> Compare:
        line = self.current.line
        left = self.expression()
        for op in RELATIONS:
            if self.accept(op):
                return Compare(op, left, self.expression(), line)
        raise self.error("expected a comparison")

    def expression(self, level: int = 0) -> Expr:
        if level == len(PRECEDENCE):
            return self.unary()
        left = self.expression(level + 1)
        while True:
            token = self.current
            op = next((op for op in PRECEDENCE[level] if self.check(op)), None)
            if op is None:
                return left
            self.position += 1
            left = Binary(op, left, self.expression(level + 1), token.line)

    def unary(self) -> Expr:
        token = self.current
        if self.accept("-"):
            return Unary("-", self.unary(), token.line)
        return self.primary()

    def primary(self) -> Expr:
        token = self.current
        if token.kind == "number":
            return Const(self.number(), token.line)
        if self.accept("("):
            inner = self.expression()
            self.expect(")")
            return inner
        if token.kind == "name":
            name = self.name().text
            if self.check("("):
                return self.call(name, token.line)
            if self.accept("["):
                index = self.expression()
                self.expect("]")
                return Index(name, index, token.line)
            return Name(name, token.line)
        raise self.error(f"expected an expression, found {token.text or 'end of input'!r}")

    def call(self, name: str, line: int) -> Call:
        self.expect("(")
        args: list[Expr] = []
        if not self.check(")"):
            args.append(self.expression())
            while self.accept(","):
                args.append(self.expression())
        self.expect(")")
        return Call(name, tuple(args), line)


def parse_hir(text: str) -> HirProgram:
    """Parse HIR source into a program; run ``check_program`` before using it."""
    program = Parser(text).program()
    logger.debug("Parsed HIR program with %s functions", len(program.functions))
    return program


def parse_hir_file(path: Path | str) -> HirProgram:
    return parse_hir(Path(path).read_text(encoding="utf-8"))
