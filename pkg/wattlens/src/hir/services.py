from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Mapping

from energy.domain import EnergyModel
from energy.services import instruction_energy
from hir.compiler import MappingTable, compile_program, folded_condition
from hir.constants import GLUE, Role
from hir.intervals import Env, ParamSpec, function_envs, inner_env, recursive_functions, trip_count
from hir.nodes import (
    Assign,
    CallStmt,
    Expr,
    For,
    HirProgram,
    If,
    Return,
    Stmt,
    Store,
    VarDecl,
    While,
    calls_in,
    walk,
)
from hir.parsers import HirError
from machine.domain import Program
from staticanalysis.domain import BoundKind, EnergyBound, PathCost
from staticanalysis.services import bcec, wcec

logger = logging.getLogger(__name__)


class HirAnalysisError(HirError):
    """Raised when a HIR program cannot be bounded at statement level."""


@dataclass(frozen=True)
class HirCosts:
    """Energy of one execution of each part of each HIR statement, in pJ."""

    statements: Mapping[str, Mapping[Role, Fraction]]
    thread_level: int = 1

    def __post_init__(self) -> None:
        frozen = {sid: MappingProxyType(dict(parts)) for sid, parts in sorted(self.statements.items())}
        object.__setattr__(self, "statements", MappingProxyType(frozen))

    def part(self, statement: str, role: Role) -> Fraction:
        return self.statements.get(statement, {}).get(role, Fraction(0))

    def total(self, statement: str) -> Fraction:
        return sum(self.statements.get(statement, {}).values(), Fraction(0))

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {
            sid: {role.value: float(value) for role, value in sorted(parts.items(), key=lambda item: item[0].value)}
            for sid, parts in self.statements.items()
        }


def lift_model(model: EnergyModel, program: Program, mapping: MappingTable, thread_level: int = 1) -> HirCosts:
    """Sum instruction energies onto the HIR statements that own them."""
    costs: dict[str, dict[Role, Fraction]] = defaultdict(lambda: defaultdict(Fraction))
    for function in program.functions:
        for block, index, instruction in function.instructions():
            entry = mapping.lookup(function.name, block.label, index)
            energy = model.spec(instruction.opcode).issue_cycles * instruction_energy(
                model, instruction.opcode, thread_level
            )
            costs[entry.statement][entry.role] += energy
    return HirCosts(statements=costs, thread_level=thread_level)


def _contains_return(statements: tuple[Stmt, ...]) -> bool:
    return any(isinstance(statement, Return) for statement in walk(statements))


class HirBoundSolver:
    """Statement-level bounds: loops multiply their parts by trip counts, branches pick a side.

    Parameter ranges are those of ``envs``, joined over every call site the way
    the compiler annotates loop bounds, so both levels bound the same loops.
    """

    def __init__(self, program: HirProgram, costs: HirCosts, kind: BoundKind, envs: Mapping[str, Env]):
        self.program = program
        self.costs = costs
        self.kind = kind
        self.envs = envs
        self._functions: dict[str, PathCost] = {}

    @property
    def upper(self) -> bool:
        return self.kind is BoundKind.UPPER

    def pick(self, first: PathCost, second: PathCost) -> PathCost:
        if self.upper:
            return first if first.cost >= second.cost else second
        return first if first.cost <= second.cost else second

    def part(self, sid: str, role: Role, times: int = 1) -> PathCost:
        function, _, local = sid.partition(":")
        energy = self.costs.part(sid, role)
        if not times:
            return PathCost()
        return PathCost(energy * times, Counter({(function, f"{local}:{role.value}"): times}))

    def calls(self, expressions: tuple[Expr, ...], times: int = 1) -> PathCost:
        total = PathCost()
        for expr in expressions:
            for call in calls_in(expr):
                total = total + self.function(call.function).scaled(times)
        return total

    def function(self, name: str) -> PathCost:
        if name not in self._functions:
            function = self.program.function(name)
            path = self.block(function.body, self.envs[name])
            returns = _contains_return(function.body)
            falls_through = not function.body or not isinstance(function.body[-1], Return)
            if falls_through and (self.upper or not returns):
                path = path + self.part(f"{name}:{GLUE}", Role.GLUE)
            self._functions[name] = path
        return self._functions[name]

    def block(self, statements: tuple[Stmt, ...], env: Env) -> PathCost:
        total = PathCost()
        for statement in statements:
            if not self.upper and _contains_return((statement,)) and not isinstance(statement, Return):
                # The rest may never run; count only what always precedes the return.
                return total + self.prefix(statement)
            total = total + self.statement(statement, env)
            if not self.upper and isinstance(statement, Return):
                return total
        return total

    def prefix(self, statement: Stmt) -> PathCost:
        if isinstance(statement, If):
            return self.part(statement.sid, Role.TEST) + self.calls((statement.cond.left, statement.cond.right))
        if isinstance(statement, For):
            return (
                self.part(statement.sid, Role.INIT)
                + self.part(statement.sid, Role.TEST)
                + self.calls((statement.lo, statement.hi))
            )
        if isinstance(statement, While):
            return self.part(statement.sid, Role.TEST) + self.calls((statement.cond.left, statement.cond.right))
        return PathCost()

    def trips(self, statement: For | While, env: Env) -> int:
        interval = trip_count(statement, env)
        if interval is None:
            raise HirAnalysisError(f"loop {statement.sid} has no computable trip count", line=statement.line)
        return interval.hi if self.upper else interval.lo

    def statement(self, statement: Stmt, env: Env) -> PathCost:
        sid = statement.sid
        if isinstance(statement, (VarDecl, Assign, Return)):
            value = () if statement.value is None else (statement.value,)
            return self.part(sid, Role.BODY) + self.calls(value)
        if isinstance(statement, Store):
            return self.part(sid, Role.BODY) + self.calls((statement.index, statement.value))
        if isinstance(statement, CallStmt):
            return self.part(sid, Role.BODY) + self.calls((statement.call,))
        if isinstance(statement, If):
            test = self.part(sid, Role.TEST) + self.calls((statement.cond.left, statement.cond.right))
            decided = folded_condition(statement.cond)
            if decided is not False:
                then = self.block(statement.then, env) + self.part(sid, Role.THEN_EXIT)
            if decided is not True:
                orelse = self.block(statement.orelse, env) + self.part(sid, Role.TEST_JUMP)
            if decided is None:
                return test + self.pick(then, orelse)
            return test + (then if decided else orelse)
        if isinstance(statement, For):
            trips = self.trips(statement, env)
            body = self.block(statement.body, inner_env(statement, env))
            return (
                self.part(sid, Role.INIT)
                + self.calls((statement.lo, statement.hi))
                + self.part(sid, Role.TEST, trips + 1)
                + self.part(sid, Role.STEP, trips)
                + body.scaled(trips)
            )
        if isinstance(statement, While):
            trips = self.trips(statement, env)
            body = self.block(statement.body, env)
            return (
                self.part(sid, Role.TEST, trips + 1)
                + self.calls((statement.cond.left, statement.cond.right), trips + 1)
                + self.part(sid, Role.TEST_JUMP)
                + self.part(sid, Role.STEP, trips)
                + body.scaled(trips)
            )
        raise HirAnalysisError(f"cannot bound statement {sid}")


def _hir_bound(program: HirProgram, costs: HirCosts, params: ParamSpec | None, kind: BoundKind) -> EnergyBound:
    recursive = recursive_functions(program)
    if recursive:
        raise HirAnalysisError(f"recursion is not supported: {', '.join(sorted(recursive))}")
    solver = HirBoundSolver(program, costs, kind, function_envs(program, params))
    path = solver.function(program.entry)
    per_block = {}
    for (function, key), count in path.blocks.items():
        local, _, role = key.rpartition(":")
        per_block[(function, key)] = count * costs.part(f"{function}:{local}", Role(role))
    bound = EnergyBound(
        kind=kind,
        value=path.cost,
        block_counts=dict(path.blocks),
        edge_counts={},
        per_block=per_block,
        thread_level=costs.thread_level,
    )
    logger.info("HIR %s bound of %s: %.3f pJ", kind.value, program.entry, float(path.cost))
    return bound


def hir_wcec(program: HirProgram, costs: HirCosts, params: ParamSpec | None = None) -> EnergyBound:
    """Worst-case energy of the entry function computed over HIR statements."""
    return _hir_bound(program, costs, params, BoundKind.UPPER)


def hir_bcec(program: HirProgram, costs: HirCosts, params: ParamSpec | None = None) -> EnergyBound:
    return _hir_bound(program, costs, params, BoundKind.LOWER)


def _deviation(hir: Fraction, isa: Fraction) -> float:
    if isa == 0:
        return 0.0 if hir == 0 else float("inf")
    return float((hir - isa) / isa * 100)


@dataclass(frozen=True)
class LevelComparison:
    isa_upper: Fraction
    hir_upper: Fraction
    isa_lower: Fraction
    hir_lower: Fraction
    per_statement: Mapping[str, Fraction] = field(default_factory=dict)

    @property
    def upper_deviation(self) -> float:
        """Percentage by which the HIR upper bound exceeds the ISA one."""
        return _deviation(self.hir_upper, self.isa_upper)

    @property
    def lower_deviation(self) -> float:
        return _deviation(self.hir_lower, self.isa_lower)

    def to_dict(self) -> dict[str, Any]:
        return {
            "isa": {"upper_pj": float(self.isa_upper), "lower_pj": float(self.isa_lower)},
            "hir": {"upper_pj": float(self.hir_upper), "lower_pj": float(self.hir_lower)},
            "deviation_pct": {"upper": self.upper_deviation, "lower": self.lower_deviation},
            "statements": {sid: float(value) for sid, value in sorted(self.per_statement.items())},
        }


def compare_levels(program: HirProgram, model: EnergyModel, params: ParamSpec | None = None) -> LevelComparison:
    """Bound a HIR program at instruction level and at statement level."""
    compiled, mapping = compile_program(program, params)
    costs = lift_model(model, compiled, mapping)
    upper = hir_wcec(program, costs, params)
    per_statement: dict[str, Fraction] = defaultdict(Fraction)
    for (function, key), value in upper.per_block.items():
        per_statement[f"{function}:{key.rpartition(':')[0]}"] += value
    return LevelComparison(
        isa_upper=wcec(compiled, None, model).value,
        hir_upper=upper.value,
        isa_lower=bcec(compiled, None, model).value,
        hir_lower=hir_bcec(program, costs, params).value,
        per_statement=dict(per_statement),
    )
