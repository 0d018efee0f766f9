from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterator, Mapping, Sequence

from hir.constants import BINARY_OPCODES, GLUE, Role
from hir.interpreter import fold, holds
from hir.intervals import Interval, ParamSpec, as_interval, function_envs, inner_env, trip_count
from hir.nodes import (
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
from hir.parsers import HirError
from machine.constants import REGISTER_COUNT, SIGN_BIT, WORD_MASK
from machine.domain import Program
from machine.parsers import parse_program

logger = logging.getLogger(__name__)


def constant_value(expr: Expr) -> int | None:
    """The word an expression folds to, or None when it depends on variables."""
    if isinstance(expr, Const):
        return expr.value & WORD_MASK
    if isinstance(expr, Unary):
        inner = constant_value(expr.operand)
        return None if inner is None else -inner & WORD_MASK
    if isinstance(expr, Binary):
        left, right = constant_value(expr.left), constant_value(expr.right)
        if left is not None and right is not None:
            return fold(expr.op, left, right)
    return None


def folded_condition(cond: Compare) -> bool | None:
    """Outcome of a condition on constants; such branches compile to a jump or nothing."""
    left, right = constant_value(cond.left), constant_value(cond.right)
    if left is None or right is None:
        return None
    return holds(cond.op, left, right)


class CompileError(HirError):
    """Raised when a HIR program cannot be lowered to EIR."""


@dataclass(frozen=True)
class MappingEntry:
    statement: str
    role: Role
    function: str
    block: str
    index: int


@dataclass(frozen=True)
class MappingTable:
    """Which HIR statement, and which part of it, every EIR instruction implements."""

    entries: tuple[MappingEntry, ...]
    _by_position: Mapping[tuple[str, str, int], MappingEntry] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        positions: dict[tuple[str, str, int], MappingEntry] = {}
        for entry in self.entries:
            key = (entry.function, entry.block, entry.index)
            if key in positions:
                raise CompileError(f"instruction {key} is mapped twice")
            positions[key] = entry
        object.__setattr__(self, "_by_position", MappingProxyType(positions))

    def lookup(self, function: str, block: str, index: int) -> MappingEntry:
        return self._by_position[(function, block, index)]

    def for_statement(self, statement: str) -> list[MappingEntry]:
        return [entry for entry in self.entries if entry.statement == statement]

    def statements(self) -> list[str]:
        return sorted({entry.statement for entry in self.entries})

    def validate(self, program: Program) -> None:
        """Every instruction of ``program`` is mapped exactly once."""
        positions = {
            (function.name, block.label, index)
            for function in program.functions
            for block, index, _ in function.instructions()
        }
        unmapped = positions - set(self._by_position)
        if unmapped:
            raise CompileError(f"unmapped instructions: {sorted(unmapped)[:3]}")
        stale = set(self._by_position) - positions
        if stale:
            raise CompileError(f"mapping names missing instructions: {sorted(stale)[:3]}")

    def to_dict(self) -> list[dict[str, Any]]:
        return [
            {
                "statement": entry.statement,
                "role": entry.role.value,
                "function": entry.function,
                "block": entry.block,
                "index": entry.index,
            }
            for entry in self.entries
        ]


@dataclass(frozen=True)
class _Ref:
    label: str


@dataclass
class _Emitted:
    opcode: str
    operands: tuple[str | int | _Ref, ...]
    statement: str
    role: Role
    bound: Interval | None = None


class FunctionCompiler:
    """Lowers one HIR function; locals get fixed registers, temporaries stack above them."""

    def __init__(self, function: FuncDecl, bases: Mapping[str, int], env: Mapping[str, Interval | None]):
        self.function = function
        self.bases = bases
        self.env: dict[str, Interval | None] = dict(env)
        self.items: list[_Emitted | str] = []
        self.scopes: list[dict[str, int]] = [{}]
        self.next_local = 0
        self.top = 0
        self.labels = 0
        self.statement = f"{function.name}:{GLUE}"
        self.role = Role.GLUE
        for param in function.params:
            self.declare(param)

    # registers

    def _check(self, register: int) -> int:
        if register >= REGISTER_COUNT:
            raise CompileError(
                f"function {self.function.name} needs more than {REGISTER_COUNT} registers",
                line=self.function.line,
            )
        return register

    def declare(self, name: str) -> int:
        register = self._check(self.next_local)
        self.next_local += 1
        self.top = max(self.top, self.next_local)
        self.scopes[-1][name] = register
        return register

    def lookup(self, name: str) -> int:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise CompileError(f"undeclared variable {name!r} in {self.function.name}")

    def alloc(self) -> int:
        register = self._check(self.top)
        self.top += 1
        return register

    # emission

    def new_label(self) -> str:
        label = f"L{self.labels}"
        self.labels += 1
        return label

    def place(self, label: str) -> None:
        self.items.append(label)

    def emit(self, opcode: str, *operands: str | int | _Ref, bound: Interval | None = None, role: Role | None = None) -> None:
        self.items.append(_Emitted(opcode, operands, self.statement, role or self.role, bound))

    def move(self, target: int, source: int) -> None:
        if target != source:
            self.emit("LDC", f"r{target}", 0)
            self.emit("ADD", f"r{target}", f"r{target}", f"r{source}")

    # expressions

    def constant(self, expr: Expr) -> int | None:
        return constant_value(expr)

    def value(self, expr: Expr) -> int:
        """Register holding ``expr``; variables are used in place."""
        folded = self.constant(expr)
        if folded is not None:
            register = self.alloc()
            self.emit("LDC", f"r{register}", folded)
            return register
        if isinstance(expr, Name):
            return self.lookup(expr.id)
        return self.compute(expr, None)

    def into(self, expr: Expr, target: int) -> None:
        folded = self.constant(expr)
        if folded is not None:
            self.emit("LDC", f"r{target}", folded)
        elif isinstance(expr, Name):
            self.move(target, self.lookup(expr.id))
        else:
            self.compute(expr, target)

    def compute(self, expr: Expr, target: int | None) -> int:
        mark = self.top
        if isinstance(expr, Call):
            width = max(1, len(expr.args))
            self._check(mark + width - 1)
            self.top = mark + width
            for offset, arg in enumerate(expr.args):
                self.into(arg, mark + offset)
            self.emit("CALL", f"r{mark}", _Ref(expr.function))
            self.top = mark + 1
            if target is None:
                return mark
            self.move(target, mark)
            self.top = mark
            return target

        if isinstance(expr, Index):
            index = self.value(expr.index)
            operation: tuple[str, tuple[str | int, ...]] = ("LDW", (f"r{index}", self.bases[expr.array]))
        elif isinstance(expr, Unary):
            operand = self.value(expr.operand)
            zero = self.alloc()
            self.emit("LDC", f"r{zero}", 0)
            operation = ("SUB", (f"r{zero}", f"r{operand}"))
        elif isinstance(expr, Binary):
            left = self.value(expr.left)
            right = self.value(expr.right)
            operation = (BINARY_OPCODES[expr.op], (f"r{left}", f"r{right}"))
        else:
            raise CompileError(f"cannot compile {expr!r}")

        destination = mark if target is None else target
        self.emit(operation[0], f"r{self._check(destination)}", *operation[1])
        self.top = mark + 1 if target is None else mark
        return destination

    # conditions

    def branch_less(self, left: int, right: int, label: str, when: bool) -> None:
        difference, sign = self.alloc(), self.alloc()
        self.emit("LDC", f"r{sign}", SIGN_BIT)
        self.emit("SUB", f"r{difference}", f"r{left}", f"r{right}")
        self.emit("AND", f"r{difference}", f"r{difference}", f"r{sign}")
        if not when:
            self.emit("XOR", f"r{difference}", f"r{difference}", f"r{sign}")
        self.emit("BRT", f"r{difference}", _Ref(label))

    def branch(self, cond: Compare, label: str, when: bool) -> None:
        """Jump to ``label`` exactly when ``cond`` evaluates to ``when``."""
        mark = self.top
        decided = folded_condition(cond)
        if decided is not None:
            if decided == when:
                self.emit("JMP", _Ref(label))
            return
        left, right = self.value(cond.left), self.value(cond.right)
        if cond.op in ("<", ">=", ">", "<="):
            if cond.op in (">", "<="):
                left, right = right, left
            self.branch_less(left, right, label, when == (cond.op in ("<", ">")))
        else:
            differs = self.alloc()
            self.emit("XOR", f"r{differs}", f"r{left}", f"r{right}")
            if when == (cond.op == "!="):
                self.emit("BRT", f"r{differs}", _Ref(label))
            else:
                skip = self.new_label()
                self.emit("BRT", f"r{differs}", _Ref(skip))
                self.emit("JMP", _Ref(label), role=Role.TEST_JUMP)
                self.place(skip)
        self.top = mark

    # statements

    def block(self, statements: tuple[Stmt, ...]) -> None:
        self.scopes.append({})
        for statement in statements:
            self.compile_statement(statement)
        self.scopes.pop()

    def enter(self, statement: Stmt, role: Role) -> None:
        self.statement, self.role = statement.sid, role
        self.top = self.next_local

    def compile_statement(self, statement: Stmt) -> None:
        self.enter(statement, Role.BODY)
        if isinstance(statement, VarDecl):
            register = self.declare(statement.name)
            if statement.value is not None:
                self.into(statement.value, register)
        elif isinstance(statement, Assign):
            self.into(statement.value, self.lookup(statement.name))
        elif isinstance(statement, Store):
            index = self.value(statement.index)
            value = self.value(statement.value)
            self.emit("STW", f"r{value}", f"r{index}", self.bases[statement.array])
        elif isinstance(statement, CallStmt):
            self.value(statement.call)
        elif isinstance(statement, Return):
            self.into(statement.value, 0)
            self.emit("RET")
        elif isinstance(statement, If):
            self.compile_if(statement)
        elif isinstance(statement, For):
            self.compile_for(statement)
        elif isinstance(statement, While):
            self.compile_while(statement)

    def compile_if(self, statement: If) -> None:
        orelse, end = self.new_label(), self.new_label()
        self.enter(statement, Role.TEST)
        self.branch(statement.cond, orelse, when=False)
        self.block(statement.then)
        if statement.orelse:
            self.enter(statement, Role.THEN_EXIT)
            self.emit("JMP", _Ref(end))
            self.place(orelse)
            self.block(statement.orelse)
            self.place(end)
        else:
            self.place(orelse)

    def compile_for(self, statement: For) -> None:
        head, exit_label = self.new_label(), self.new_label()
        trips = trip_count(statement, self.env)
        self.enter(statement, Role.INIT)
        self.scopes.append({})
        iterator = self.declare(statement.var)
        limit = self.declare(f"{statement.var}.limit")
        self.into(statement.lo, iterator)
        self.enter(statement, Role.INIT)
        self.into(statement.hi, limit)
        self.place(head)
        self.enter(statement, Role.TEST)
        self.branch_less(iterator, limit, exit_label, when=False)
        outer_env = self.env
        self.env = inner_env(statement, outer_env)
        self.block(statement.body)
        self.env = outer_env
        self.enter(statement, Role.STEP)
        one = self.alloc()
        self.emit("LDC", f"r{one}", 1)
        self.emit("ADD", f"r{iterator}", f"r{iterator}", f"r{one}")
        self.emit("JMP", _Ref(head), bound=trips)
        self.place(exit_label)
        self.scopes.pop()

    def compile_while(self, statement: While) -> None:
        head, exit_label = self.new_label(), self.new_label()
        self.place(head)
        self.enter(statement, Role.TEST)
        self.branch(statement.cond, exit_label, when=False)
        self.block(statement.body)
        self.enter(statement, Role.STEP)
        self.emit("JMP", _Ref(head), bound=trip_count(statement, self.env))
        self.place(exit_label)

    def compile(self) -> tuple[list[str], list[tuple[str, Role]]]:
        self.block(self.function.body)
        body = self.function.body
        if not body or not isinstance(body[-1], Return):
            self.statement, self.role = f"{self.function.name}:{GLUE}", Role.GLUE
            self.top = self.next_local
            self.emit("LDC", "r0", 0)
            self.emit("RET")
        return self.render()

    def render(self) -> tuple[list[str], list[tuple[str, Role]]]:
        aliases: dict[str, str] = {}
        pending: str | None = None
        for item in self.items:
            if isinstance(item, str):
                if pending is None:
                    pending = item
                else:
                    aliases[item] = pending
            else:
                pending = None

        def operand(value: str | int | _Ref) -> str:
            if isinstance(value, _Ref):
                return aliases.get(value.label, value.label)
            return str(value)

        params = " ".join(f"r{index}" for index in range(len(self.function.params)))
        lines = [f".func {self.function.name} {params}".rstrip()]
        meta: list[tuple[str, Role]] = []
        for item in self.items:
            if isinstance(item, str):
                if item not in aliases:
                    lines.append(f"{item}:")
                continue
            if item.bound is not None:
                lines.append(f"    @bound {item.bound.lo}..{item.bound.hi}")
            operands = ", ".join(operand(value) for value in item.operands)
            lines.append(f"    {item.opcode} {operands}".rstrip())
            meta.append((item.statement, item.role))
        return lines, meta


def bind_inputs(program: HirProgram, inputs: Mapping[str, int | Sequence[int]]) -> dict[str, int]:
    """Simulator inputs for HIR entry parameters and array contents."""
    entry = program.function(program.entry)
    bases = program.array_bases()
    bound: dict[str, int] = {}
    for name, value in inputs.items():
        if name in entry.params:
            bound[f"r{entry.params.index(name)}"] = int(value)
        elif name in bases:
            for offset, item in enumerate(value):
                bound[f"mem[{bases[name] + offset}]"] = int(item)
        else:
            raise CompileError(f"unknown input {name!r}")
    return bound


def _domains(program: HirProgram, params: ParamSpec | None) -> Iterator[str]:
    entry = program.function(program.entry)
    for name, value in (params or {}).items():
        if name not in entry.params:
            raise CompileError(f"{name!r} is not a parameter of {entry.name}")
        interval = as_interval(value)
        yield f".domain r{entry.params.index(name)} {interval.lo}..{interval.hi}"


def compile_text(program: HirProgram, params: ParamSpec | None = None) -> tuple[str, dict[str, list[tuple[str, Role]]]]:
    bases = program.array_bases()
    envs = function_envs(program, params)
    lines = ["; compiled from HIR", f".entry {program.entry}", *_domains(program, params)]
    meta: dict[str, list[tuple[str, Role]]] = {}
    for function in program.functions:
        function_lines, meta[function.name] = FunctionCompiler(function, bases, envs[function.name]).compile()
        lines.extend(function_lines)
    return "\n".join(lines) + "\n", meta


def compile_program(program: HirProgram, params: ParamSpec | None = None) -> tuple[Program, MappingTable]:
    """Lower a checked HIR program to EIR plus its statement mapping.

    ``params`` gives values or ranges for the entry parameters; loops whose
    trip counts follow from them get ``@bound`` annotations on their back edge.
    Constant folding is the only optimisation: branches on folded conditions
    become plain jumps or vanish, but the code they skip is still emitted.
    """
    text, meta = compile_text(program, params)
    compiled = parse_program(text)
    entries: list[MappingEntry] = []
    for function in compiled.functions:
        positions = list(function.instructions())
        roles = meta[function.name]
        if len(positions) != len(roles):
            raise CompileError(f"mapping of {function.name} lost instructions")
        for (block, index, _), (statement, role) in zip(positions, roles):
            entries.append(MappingEntry(statement, role, function.name, block.label, index))
    mapping = MappingTable(tuple(entries))
    mapping.validate(compiled)
    logger.info("Compiled HIR program to %s instructions", len(entries))
    return compiled, mapping
