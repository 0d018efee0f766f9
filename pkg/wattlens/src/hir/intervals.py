from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import networkx as nx

from hir.nodes import (
    Assign,
    Binary,
    Call,
    Const,
    Expr,
    For,
    FuncDecl,
    HirProgram,
    If,
    Name,
    Stmt,
    Unary,
    While,
    calls_in,
    expressions,
    walk,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    @classmethod
    def point(cls, value: int) -> "Interval":
        return cls(value, value)

    def __add__(self, other: "Interval") -> "Interval":
        return Interval(self.lo + other.lo, self.hi + other.hi)

    def __sub__(self, other: "Interval") -> "Interval":
        return Interval(self.lo - other.hi, self.hi - other.lo)

    def __mul__(self, other: "Interval") -> "Interval":
        products = [a * b for a in (self.lo, self.hi) for b in (other.lo, other.hi)]
        return Interval(min(products), max(products))

    def __neg__(self) -> "Interval":
        return Interval(-self.hi, -self.lo)

    def union(self, other: "Interval | None") -> "Interval":
        if other is None:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def clamp_low(self, floor: int = 0) -> "Interval":
        return Interval(max(floor, self.lo), max(floor, self.hi))


Env = Mapping[str, Union[Interval, None]]
ParamSpec = Mapping[str, Union[int, tuple[int, int], Interval]]


def as_interval(value: int | tuple[int, int] | Interval) -> Interval:
    if isinstance(value, Interval):
        return value
    if isinstance(value, tuple):
        return Interval(int(value[0]), int(value[1]))
    return Interval.point(int(value))


def evaluate(expr: Expr, env: Env) -> Interval | None:
    """Range of an affine expression over ``env``; None when it cannot be bounded."""
    if isinstance(expr, Const):
        return Interval.point(expr.value)
    if isinstance(expr, Name):
        return env.get(expr.id)
    if isinstance(expr, Unary):
        inner = evaluate(expr.operand, env)
        return None if inner is None else -inner
    if isinstance(expr, Binary):
        left, right = evaluate(expr.left, env), evaluate(expr.right, env)
        if left is None or right is None:
            return None
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "<<" and right.lo == right.hi and 0 <= right.lo < 32:
            return left * Interval.point(1 << right.lo)
    return None


def trip_count(statement: For | While, env: Env) -> Interval | None:
    """Range of the number of body executions of one run of the loop."""
    if isinstance(statement, For):
        lo, hi = evaluate(statement.lo, env), evaluate(statement.hi, env)
        if lo is None or hi is None:
            return None
        return (hi - lo).clamp_low()
    lo, hi = evaluate(statement.bound_lo, env), evaluate(statement.bound_hi, env)
    if lo is None or hi is None:
        return None
    return Interval(max(0, lo.lo), max(0, lo.lo, hi.hi))


def iterator_range(statement: For, env: Env) -> Interval | None:
    lo, hi = evaluate(statement.lo, env), evaluate(statement.hi, env)
    if lo is None or hi is None:
        return None
    return Interval(lo.lo, max(lo.lo, hi.hi - 1))


def inner_env(statement: For, env: Env) -> dict[str, Interval | None]:
    return {**env, statement.var: iterator_range(statement, env)}


def call_sites(statements: tuple[Stmt, ...], env: Env) -> Iterator[tuple[Call, Env]]:
    """Every call with the variable ranges in force where it is made."""
    for statement in statements:
        for expr in expressions(statement):
            for call in calls_in(expr):
                yield call, env
        if isinstance(statement, For):
            yield from call_sites(statement.body, inner_env(statement, env))
        elif isinstance(statement, While):
            yield from call_sites(statement.body, env)
        elif isinstance(statement, If):
            yield from call_sites(statement.then, env)
            yield from call_sites(statement.orelse, env)


def hir_call_graph(program: HirProgram) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(function.name for function in program.functions)
    for function in program.functions:
        for call, _ in call_sites(function.body, {}):
            graph.add_edge(function.name, call.function)
    return graph


def recursive_functions(program: HirProgram) -> set[str]:
    graph = hir_call_graph(program)
    recursive: set[str] = set()
    for component in nx.strongly_connected_components(graph):
        name = next(iter(component))
        if len(component) > 1 or graph.has_edge(name, name):
            recursive |= component
    return recursive


def fixed_env(function: FuncDecl, env: Env) -> dict[str, Interval | None]:
    """``env`` with the parameters that ``function`` reassigns left unbounded."""
    assigned = {statement.name for statement in walk(function.body) if isinstance(statement, Assign)}
    return {name: None if name in assigned else value for name, value in env.items()}


def entry_env(program: HirProgram, params: ParamSpec | None) -> dict[str, Interval | None]:
    entry = program.function(program.entry)
    params = params or {}
    return fixed_env(entry, {name: as_interval(params[name]) if name in params else None for name in entry.params})


def function_envs(program: HirProgram, params: ParamSpec | None) -> dict[str, dict[str, Interval | None]]:
    """Parameter ranges of every function, joined over all of its call sites.

    Parameters of recursive functions stay unbounded.
    """
    graph = hir_call_graph(program)
    recursive = recursive_functions(program)
    envs: dict[str, dict[str, Interval | None]] = {
        function.name: {param: None for param in function.params} for function in program.functions
    }
    envs[program.entry] = entry_env(program, params)
    reached = {program.entry}
    condensed = nx.condensation(graph)
    for component in nx.topological_sort(condensed):
        for name in sorted(condensed.nodes[component]["members"]):
            if name not in reached:
                continue
            function = program.function(name)
            for call, env in call_sites(function.body, fixed_env(function, envs[name])):
                callee = program.function(call.function)
                first = call.function not in reached
                reached.add(call.function)
                if call.function in recursive:
                    continue
                target = envs[call.function]
                for param, arg in zip(callee.params, call.args):
                    value = evaluate(arg, env)
                    if value is None:
                        target[param] = None
                    elif first:
                        target[param] = value
                    elif target[param] is not None:
                        target[param] = value.union(target[param])
    return {name: fixed_env(program.function(name), env) for name, env in envs.items()}
