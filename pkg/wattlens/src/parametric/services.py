from __future__ import annotations

import logging
from dataclasses import replace
from fractions import Fraction
from typing import Iterable, Mapping

import networkx as nx
import sympy

from hir.constants import GLUE, Role
from hir.intervals import hir_call_graph
from hir.nodes import (
    Assign,
    Binary,
    CallStmt,
    Compare,
    Const as ConstExpr,
    Expr,
    For,
    FuncDecl,
    HirProgram,
    If,
    Name,
    Return,
    Stmt,
    Store,
    Unary,
    VarDecl,
    While,
    calls_in,
    expressions,
    walk,
)
from hir.services import HirCosts
from parametric.domain import (
    BaseCase,
    BindingError,
    Bounded,
    CallGuard,
    CallTerm,
    Choice,
    Condition,
    Const,
    CostFunction,
    CostRelation,
    DomainError,
    ForAll,
    Guard,
    NonPolynomialCostError,
    Recurrence,
    Recursive,
    Scaled,
    Seq,
    Sum,
    Term,
    UnsupportedRelationError,
    bind_var,
    first_violation,
    guard_symbols,
    rational,
    substitute_guards,
    symbol,
    to_fraction,
)
from staticanalysis.domain import BoundKind

logger = logging.getLogger(__name__)

ZERO = Const(Fraction(0))


def _contains_return(statements: tuple[Stmt, ...]) -> bool:
    return any(isinstance(statement, Return) for statement in walk(statements))


def _fixed_params(function: FuncDecl) -> frozenset[str]:
    """Parameters never reassigned in the body; only these can appear in a cost function."""
    assigned = {statement.name for statement in walk(function.body) if isinstance(statement, Assign)}
    return frozenset(function.params) - assigned


class RelationExtractor:
    """Turns one HIR function into a cost term over its parameters."""

    def __init__(self, program: HirProgram, costs: HirCosts, function: FuncDecl):
        self.program = program
        self.costs = costs
        self.function = function
        self.skip: str | None = None
        self.guards: list[list[Guard]] = [[]]
        # Symbols known to be non-negative: parameters, and loop variables counting up from such a start.
        self.nonneg = {symbol(param) for param in function.params}

    def is_nonneg(self, expr: sympy.Expr) -> bool:
        expr = sympy.expand(expr)
        if expr.is_number:
            return bool(expr >= 0)
        if not expr.free_symbols <= self.nonneg:
            return False
        return all(coefficient >= 0 for coefficient in sympy.Poly(expr, *sorted(expr.free_symbols, key=str)).coeffs())

    def require(self, expr: sympy.Expr, sid: str) -> None:
        if not self.is_nonneg(expr):
            self.guards[-1].append(Condition(sympy.expand(expr), sid))

    def collect(self) -> tuple[Guard, ...]:
        return tuple(dict.fromkeys(self.guards.pop()))

    def part(self, sid: str, role: Role) -> Const:
        return Const(self.costs.part(sid, role))

    def affine(self, expr: Expr, scope: frozenset[str]) -> sympy.Expr | None:
        if isinstance(expr, ConstExpr):
            return sympy.Integer(expr.value)
        if isinstance(expr, Name):
            return symbol(expr.id) if expr.id in scope else None
        if isinstance(expr, Unary):
            inner = self.affine(expr.operand, scope)
            return None if inner is None else -inner
        if isinstance(expr, Binary):
            left, right = self.affine(expr.left, scope), self.affine(expr.right, scope)
            if left is None or right is None:
                return None
            if expr.op == "+":
                return left + right
            if expr.op == "-":
                return left - right
            if expr.op == "*":
                return left * right
            if expr.op == "<<" and right.is_Integer and 0 <= int(right) < 32:
                return left * 2 ** int(right)
        return None

    def bound(self, expr: Expr, scope: frozenset[str], what: str) -> sympy.Expr:
        value = self.affine(expr, scope)
        if value is None:
            raise UnsupportedRelationError(
                f"{what} in {self.function.name} (line {expr.line}) is not affine in parameters and loop variables"
            )
        return value

    def calls(self, exprs: Iterable[Expr], scope: frozenset[str]) -> Term:
        terms: list[Term] = []
        for expr in exprs:
            for call in calls_in(expr):
                if call.function == self.skip:
                    continue
                args = tuple(self.affine(arg, scope) for arg in call.args)
                terms.append(CallTerm(call.function, args))
                self.guards[-1].append(CallGuard(call.function, args))
        return Seq(tuple(terms))

    def relation(self) -> CostRelation:
        graph = hir_call_graph(self.program)
        name = self.function.name
        if graph.has_edge(name, name):
            term: Term = self.recurrence()
        else:
            term = self.body()
        return CostRelation(name, self.function.params, term, self.collect())

    def body(self) -> Term:
        scope = _fixed_params(self.function)
        statements = self.function.body
        term = self.block(statements, scope)
        if not statements or not isinstance(statements[-1], Return):
            glue = self.part(f"{self.function.name}:{GLUE}", Role.GLUE)
            term = Seq((term, Bounded(glue, ZERO) if _contains_return(statements) else glue))
        return term

    def block(self, statements: tuple[Stmt, ...], scope: frozenset[str]) -> Term:
        terms: list[Term] = []
        for position, statement in enumerate(statements):
            if _contains_return((statement,)) and not isinstance(statement, Return):
                rest = self.block(statements[position + 1:], scope)
                full = Seq((self.statement(statement, scope), rest))
                terms.append(Bounded(full, self.prefix(statement, scope)))
                break
            terms.append(self.statement(statement, scope))
            if isinstance(statement, Return):
                break
        return Seq(tuple(terms))

    def prefix(self, statement: Stmt, scope: frozenset[str]) -> Term:
        """Cost certainly paid before a return nested in ``statement`` can leave the function."""
        if isinstance(statement, (If, While)):
            return Seq((self.part(statement.sid, Role.TEST), self.calls((statement.cond.left, statement.cond.right), scope)))
        if isinstance(statement, For):
            return Seq(
                (
                    self.part(statement.sid, Role.INIT),
                    self.part(statement.sid, Role.TEST),
                    self.calls((statement.lo, statement.hi), scope),
                )
            )
        return ZERO

    def statement(self, statement: Stmt, scope: frozenset[str]) -> Term:
        sid = statement.sid
        if isinstance(statement, (VarDecl, Assign, Store, Return, CallStmt)):
            return Seq((self.part(sid, Role.BODY), self.calls(expressions(statement), scope)))
        if isinstance(statement, If):
            test = Seq((self.part(sid, Role.TEST), self.calls(expressions(statement), scope)))
            then = Seq((self.block(statement.then, scope), self.part(sid, Role.THEN_EXIT)))
            orelse = Seq((self.block(statement.orelse, scope), self.part(sid, Role.TEST_JUMP)))
            return Seq((test, Choice((then, orelse))))
        if isinstance(statement, For):
            lo = self.bound(statement.lo, scope, "loop start")
            hi = self.bound(statement.hi, scope, "loop end")
            trips = sympy.expand(hi - lo)
            bounds = self.calls((statement.lo, statement.hi), scope)
            if trips.is_number and trips < 0:
                return Seq((self.part(sid, Role.INIT), bounds, self.part(sid, Role.TEST)))
            # hi - lo is the trip count only while hi >= lo.
            self.require(trips, sid)
            self.guards.append([])
            counter = symbol(statement.var)
            if self.is_nonneg(lo):
                self.nonneg.add(counter)
            body = self.block(statement.body, scope | {statement.var})
            self.nonneg.discard(counter)
            inner = self.collect()
            if inner:
                var, inner = bind_var(statement.var, inner)
                self.guards[-1].append(ForAll(var, lo, hi, inner))
            return Seq(
                (
                    self.part(sid, Role.INIT),
                    bounds,
                    Scaled(trips + 1, self.part(sid, Role.TEST)),
                    Scaled(trips, self.part(sid, Role.STEP)),
                    Sum(statement.var, lo, hi, body),
                )
            )
        if isinstance(statement, While):
            body = self.block(statement.body, scope)
            test = Seq((self.part(sid, Role.TEST), self.calls(expressions(statement), scope)))

            def loop(trips: sympy.Expr) -> Term:
                return Seq(
                    (
                        Scaled(trips + 1, test),
                        self.part(sid, Role.TEST_JUMP),
                        Scaled(trips, self.part(sid, Role.STEP)),
                        Scaled(trips, body),
                    )
                )

            most = self.bound(statement.bound_hi, scope, "loop bound")
            least = self.bound(statement.bound_lo, scope, "loop bound")
            self.require(least, sid)
            self.require(most - least, sid)
            return Bounded(loop(most), loop(least))
        raise UnsupportedRelationError(f"cannot extract a relation for {sid}")

    def recurrence(self) -> Recurrence:
        """Recognise ``if (p <= c) { ...; return e; } ... f(p - k) ...``."""
        function = self.function
        name = function.name
        unsupported = f"unsupported recursion shape in {name}"
        self_calls = [
            call
            for statement in walk(function.body)
            for expr in expressions(statement)
            for call in calls_in(expr)
            if call.function == name
        ]
        if len(self_calls) != 1:
            raise UnsupportedRelationError(f"{unsupported}: {len(self_calls)} self-calls, only one is supported")
        call = self_calls[0]
        for statement in walk(function.body):
            if isinstance(statement, (For, While)) and any(
                inner_call is call
                for inner in walk(statement.body)
                for expr in expressions(inner)
                for inner_call in calls_in(expr)
            ):
                raise UnsupportedRelationError(f"{unsupported}: self-call inside a loop")

        guard = function.body[0] if function.body else None
        if not isinstance(guard, If) or guard.orelse or not guard.then or not isinstance(guard.then[-1], Return):
            raise UnsupportedRelationError(f"{unsupported}: the first statement must be a returning base-case if")
        param, threshold, exact_only = self._guard(guard.cond, unsupported)
        position = function.params.index(param)

        step_size = None
        for index, (param_name, arg) in enumerate(zip(function.params, call.args)):
            if index == position:
                if (
                    isinstance(arg, Binary)
                    and arg.op == "-"
                    and isinstance(arg.left, Name)
                    and arg.left.id == param
                    and isinstance(arg.right, ConstExpr)
                    and arg.right.value >= 1
                ):
                    step_size = arg.right.value
            elif not (isinstance(arg, Name) and arg.id == param_name):
                raise UnsupportedRelationError(f"{unsupported}: parameter {param_name} must be passed unchanged")
        if step_size is None:
            raise UnsupportedRelationError(f"{unsupported}: the self-call must pass {param} - k with constant k >= 1")
        if exact_only and step_size != 1:
            raise UnsupportedRelationError(f"{unsupported}: an equality guard needs a step of 1")

        scope = _fixed_params(function)
        self.skip = name
        self.guards.append([])
        test = Seq((self.part(guard.sid, Role.TEST), self.calls(expressions(guard), scope)))
        common = list(self.collect())
        self.guards.append(list(common))
        base = Seq((test, self.block(guard.then, scope)))
        base_guards = self.collect()
        self.guards.append(list(common))
        rest = self.block(function.body[1:], scope) if len(function.body) > 1 else ZERO
        step_guards = self.collect()
        if base_guards or step_guards:
            var = sympy.Dummy(param, integer=True)
            renaming = {symbol(param): var}
            self.guards[-1].append(
                Recursive(
                    var,
                    symbol(param),
                    step_size,
                    threshold,
                    substitute_guards(step_guards, renaming),
                    substitute_guards(base_guards, renaming),
                )
            )
        step = Seq((test, self.part(guard.sid, Role.TEST_JUMP), rest))
        if len(function.body) == 1 or not isinstance(function.body[-1], Return):
            step = Seq((step, self.part(f"{name}:{GLUE}", Role.GLUE)))
        self.skip = None
        return Recurrence(param, step_size, threshold, base, step)

    def _guard(self, cond: Compare, unsupported: str) -> tuple[str, int, bool]:
        left, right, op = cond.left, cond.right, cond.op
        if isinstance(left, ConstExpr) and isinstance(right, Name):
            left, right = right, left
            op = {"<": ">", ">": "<", "<=": ">=", ">=": "<=", "==": "==", "!=": "!="}[op]
        if not (isinstance(left, Name) and left.id in self.function.params and isinstance(right, ConstExpr)):
            raise UnsupportedRelationError(f"{unsupported}: the guard must compare a parameter with a constant")
        if op == "<":
            return left.id, right.value - 1, False
        if op == "<=":
            return left.id, right.value, False
        if op == "==":
            return left.id, right.value, True
        raise UnsupportedRelationError(f"{unsupported}: guard {op!r} does not bound the recursion from below")


def extract_relations(program: HirProgram, costs: HirCosts) -> list[CostRelation]:
    """One cost relation per function, built from statement costs."""
    graph = hir_call_graph(program)
    for component in nx.strongly_connected_components(graph):
        if len(component) > 1:
            names = ", ".join(sorted(component))
            raise UnsupportedRelationError(f"unsupported recursion shape: mutual recursion between {names}")
    relations = [RelationExtractor(program, costs, function).relation() for function in program.functions]
    logger.debug("Extracted %s cost relations", len(relations))
    return relations


def _as_polynomial(expr: sympy.Expr, where: str) -> sympy.Expr:
    expr = sympy.expand(expr)
    symbols = sorted(expr.free_symbols, key=lambda item: item.name)
    if symbols and not expr.is_polynomial(*symbols):
        raise NonPolynomialCostError(f"cost of {where} is not a polynomial: {expr}")
    return expr


def _coefficientwise(options: list[sympy.Expr], upper: bool) -> sympy.Expr:
    """Coefficient-wise max or min; bounds the pointwise one for non-negative variables."""
    pick = max if upper else min
    symbols = sorted(set().union(*(option.free_symbols for option in options)), key=lambda item: item.name)
    if not symbols:
        return pick(sympy.Rational(option) for option in options)
    polys = [sympy.Poly(option, *symbols).as_dict() for option in options]
    monomials = set().union(*polys)
    result = sympy.Integer(0)
    for monomial in monomials:
        coefficient = pick(poly.get(monomial, sympy.Integer(0)) for poly in polys)
        result += coefficient * sympy.Mul(*(variable**power for variable, power in zip(symbols, monomial)))
    return result


class RelationSolver:
    def __init__(self) -> None:
        self.solved: dict[str, CostFunction] = {}

    def value(self, term: Term, upper: bool, where: str) -> sympy.Expr:
        if isinstance(term, Const):
            return rational(term.value)
        if isinstance(term, Seq):
            return sympy.Add(*(self.value(part, upper, where) for part in term.parts))
        if isinstance(term, Scaled):
            return term.factor * self.value(term.term, upper, where)
        if isinstance(term, Sum):
            body = self.value(term.body, upper, where)
            variable = symbol(term.var)
            return _as_polynomial(sympy.summation(body, (variable, term.lo, term.hi - 1)), where)
        if isinstance(term, Choice):
            options = [_as_polynomial(self.value(option, upper, where), where) for option in term.options]
            return _coefficientwise(options, upper)
        if isinstance(term, Bounded):
            return self.value(term.upper if upper else term.lower, upper, where)
        if isinstance(term, CallTerm):
            return self.call(term, upper, where)
        if isinstance(term, Recurrence):
            raise UnsupportedRelationError(f"recurrence nested inside {where}")
        raise UnsupportedRelationError(f"unknown term {term!r}")

    def call(self, term: CallTerm, upper: bool, where: str) -> sympy.Expr:
        callee = self.solved[term.function]
        expr = callee.upper if upper else callee.lower
        substitutions = {}
        for param, arg in zip(callee.params, term.args):
            variable = symbol(param)
            if variable not in expr.free_symbols:
                continue
            if arg is None:
                raise UnsupportedRelationError(
                    f"cost of {term.function} depends on {param}, whose argument in {where} is not affine"
                )
            substitutions[variable] = arg
        return sympy.expand(expr.xreplace(substitutions))

    def recurrence(self, relation: CostRelation) -> CostFunction:
        term = relation.term
        assert isinstance(term, Recurrence)
        where = relation.function
        variable = symbol(term.param)
        step_variable = sympy.Dummy("m", integer=True)
        bounds = {}
        for upper in (True, False):
            base = _as_polynomial(self.value(term.base, upper, where), where)
            step = _as_polynomial(self.value(term.step, upper, where), where)
            at_threshold = base.xreplace({variable: term.threshold})
            if term.k == 1:
                total = at_threshold + sympy.summation(
                    step.xreplace({variable: step_variable}), (step_variable, term.threshold + 1, variable)
                )
            elif upper:
                # ceil((p - c) / k) <= (p - c + k - 1) / k steps, each no dearer than at p.
                total = at_threshold + sympy.Rational(1, term.k) * (variable - term.threshold + term.k - 1) * step
            else:
                smallest = step.xreplace({variable: term.threshold + 1})
                total = at_threshold + sympy.Rational(1, term.k) * (variable - term.threshold) * smallest
            bounds[upper] = (_as_polynomial(total, where), base)
        return CostFunction(
            name=relation.function,
            params=relation.params,
            upper=bounds[True][0],
            lower=bounds[False][0],
            base=BaseCase(term.param, term.threshold, bounds[True][1], bounds[False][1]),
        )

    def resolve(self, guards: tuple[Guard, ...], where: str) -> tuple[Guard, ...]:
        """Replace call placeholders by the callee's guards in the caller's terms."""
        result: list[Guard] = []
        for guard in guards:
            if isinstance(guard, CallGuard):
                callee = self.solved[guard.function]
                needed = set().union(*(guard_symbols(item) for item in callee.guards))
                mapping = {}
                for param, arg in zip(callee.params, guard.args):
                    variable = symbol(param)
                    if variable not in needed:
                        continue
                    if arg is None:
                        raise UnsupportedRelationError(
                            f"loop ranges of {guard.function} depend on {param}, whose argument in {where} is not affine"
                        )
                    mapping[variable] = arg
                result.extend(substitute_guards(callee.guards, mapping))
            elif isinstance(guard, ForAll):
                result.append(ForAll(guard.var, guard.lo, guard.hi, self.resolve(guard.inner, where)))
            elif isinstance(guard, Recursive):
                step, base = self.resolve(guard.step, where), self.resolve(guard.base, where)
                result.append(Recursive(guard.var, guard.start, guard.k, guard.threshold, step, base))
            else:
                result.append(guard)
        return tuple(
            dict.fromkeys(
                guard for guard in result if not (isinstance(guard, Condition) and guard.expr.is_number and guard.expr >= 0)
            )
        )

    def solve(self, relation: CostRelation) -> CostFunction:
        if isinstance(relation.term, Recurrence):
            cost = self.recurrence(relation)
        else:
            cost = CostFunction(
                name=relation.function,
                params=relation.params,
                upper=_as_polynomial(self.value(relation.term, True, relation.function), relation.function),
                lower=_as_polynomial(self.value(relation.term, False, relation.function), relation.function),
            )
        cost = replace(cost, guards=self.resolve(relation.guards, relation.function))
        self.solved[relation.function] = cost
        return cost


def _dependencies(term: Term) -> set[str]:
    if isinstance(term, CallTerm):
        return {term.function}
    if isinstance(term, Seq):
        return set().union(*(_dependencies(part) for part in term.parts))
    if isinstance(term, Choice):
        return set().union(*(_dependencies(option) for option in term.options))
    if isinstance(term, (Sum, Scaled)):
        return _dependencies(term.body if isinstance(term, Sum) else term.term)
    if isinstance(term, Bounded):
        return _dependencies(term.upper) | _dependencies(term.lower)
    if isinstance(term, Recurrence):
        return _dependencies(term.base) | _dependencies(term.step)
    return set()


def solve(relations: Iterable[CostRelation]) -> dict[str, CostFunction]:
    """Closed-form upper and lower cost functions, callees solved before callers."""
    relations = {relation.function: relation for relation in relations}
    graph = nx.DiGraph()
    graph.add_nodes_from(relations)
    for name, relation in relations.items():
        for callee in _dependencies(relation.term) - {name}:
            graph.add_edge(callee, name)
    solver = RelationSolver()
    for name in nx.lexicographical_topological_sort(graph):
        cost = solver.solve(relations[name])
        logger.info("Cost of %s: upper %s", name, cost.format(True))
    return {name: solver.solved[name] for name in relations}


def eval_cost(cost: CostFunction, bindings: Mapping[str, int], kind: BoundKind = BoundKind.UPPER) -> Fraction:
    """Exact energy in pJ at non-negative integer parameter values."""
    values = {}
    for param in cost.params:
        if param not in bindings:
            raise BindingError(f"parameter {param!r} of {cost.name} is not bound")
        value = bindings[param]
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise BindingError(f"parameter {param!r} must be a non-negative integer, got {value!r}")
        values[symbol(param)] = sympy.Integer(value)
    violation = first_violation(cost.guards, {symbol(param): int(bindings[param]) for param in cost.params})
    if violation is not None:
        raise DomainError(
            f"{cost.name} holds only where {violation.describe()}, which fails at {dict(bindings)} (loop {violation.sid})"
        )
    upper = BoundKind(kind) is BoundKind.UPPER
    expr = cost.upper if upper else cost.lower
    if cost.base is not None and bindings[cost.base.param] <= cost.base.threshold:
        expr = cost.base.upper if upper else cost.base.lower
    return max(Fraction(0), to_fraction(expr.xreplace(values)))
