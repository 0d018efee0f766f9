from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Mapping, Union

import sympy

from core.errors import WattlensError


class ParametricError(WattlensError):
    """Base class for cost-function errors."""


class UnsupportedRelationError(ParametricError):
    """Raised when a program's cost does not fit a supported relation shape."""


class NonPolynomialCostError(ParametricError):
    """Raised when a relation solves to something other than a polynomial."""


class BindingError(ParametricError):
    """Raised when a cost function is evaluated with missing or negative parameters."""


@dataclass(frozen=True)
class Const:
    value: Fraction


@dataclass(frozen=True)
class Seq:
    parts: tuple["Term", ...]


@dataclass(frozen=True)
class Sum:
    """``body`` summed for ``var`` from ``lo`` to ``hi - 1``."""

    var: str
    lo: sympy.Expr
    hi: sympy.Expr
    body: "Term"


@dataclass(frozen=True)
class Scaled:
    factor: sympy.Expr
    term: "Term"


@dataclass(frozen=True)
class Choice:
    """One of several paths; upper bounds take the costliest, lower bounds the cheapest."""

    options: tuple["Term", ...]


@dataclass(frozen=True)
class Bounded:
    """Different terms for the upper and the lower bound."""

    upper: "Term"
    lower: "Term"


@dataclass(frozen=True)
class CallTerm:
    function: str
    args: tuple[sympy.Expr | None, ...]


@dataclass(frozen=True)
class Recurrence:
    """C(p) = step + C(p - k) while p > threshold, and C(p) = base otherwise."""

    param: str
    k: int
    threshold: int
    base: "Term"
    step: "Term"


Term = Union[Const, Seq, Sum, Scaled, Choice, Bounded, CallTerm, Recurrence]


@dataclass(frozen=True)
class CostRelation:
    function: str
    params: tuple[str, ...]
    term: Term
    guards: tuple["Guard", ...] = ()


def symbol(name: str) -> sympy.Symbol:
    return sympy.Symbol(name, integer=True)


def rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def to_fraction(value: sympy.Expr) -> Fraction:
    number = sympy.Rational(value)
    return Fraction(int(number.p), int(number.q))


class DomainError(BindingError):
    """Raised when parameter values leave the domain a cost function was solved for."""


@dataclass(frozen=True)
class Condition:
    """``expr >= 0`` must hold; ``expr`` is the trip count of the loop at ``sid``."""

    expr: sympy.Expr
    sid: str

    def describe(self) -> str:
        return f"{self.expr} >= 0"


@dataclass(frozen=True)
class ForAll:
    """``inner`` holds for every value of ``var`` in ``lo .. hi - 1``."""

    var: sympy.Symbol
    lo: sympy.Expr
    hi: sympy.Expr
    inner: tuple["Guard", ...]

    def describe(self) -> str:
        return f"for {self.var} in {self.lo}..{self.hi}: " + ", ".join(guard.describe() for guard in self.inner)


@dataclass(frozen=True)
class CallGuard:
    """Placeholder for the guards of a callee, filled in once the callee is solved."""

    function: str
    args: tuple[sympy.Expr | None, ...]

    def describe(self) -> str:
        return f"guards of {self.function}"


@dataclass(frozen=True)
class Recursive:
    """``step`` holds at every level ``var`` = start, start - k, ... above ``threshold``, ``base`` below."""

    var: sympy.Symbol
    start: sympy.Expr
    k: int
    threshold: int
    step: tuple["Guard", ...]
    base: tuple["Guard", ...]

    def describe(self) -> str:
        parts = [f"{guard.describe()} while {self.var} > {self.threshold}" for guard in self.step]
        parts += [f"{guard.describe()} once {self.var} <= {self.threshold}" for guard in self.base]
        return f"with {self.var} = {self.start} stepping by {self.k}: " + ", ".join(parts)


Guard = Union[Condition, ForAll, CallGuard, Recursive]


def bind_var(name: str, guards: Iterable["Guard"]) -> tuple[sympy.Dummy, tuple["Guard", ...]]:
    """Rename the loop or recursion variable ``name`` to a fresh dummy inside ``guards``."""
    dummy = sympy.Dummy(name, integer=True)
    return dummy, substitute_guards(guards, {symbol(name): dummy})


def substitute_guards(guards: Iterable["Guard"], mapping: Mapping[sympy.Symbol, sympy.Expr]) -> tuple["Guard", ...]:
    result: list[Guard] = []
    for guard in guards:
        if isinstance(guard, Condition):
            result.append(Condition(sympy.expand(guard.expr.xreplace(mapping)), guard.sid))
        elif isinstance(guard, ForAll):
            result.append(
                ForAll(
                    guard.var,
                    guard.lo.xreplace(mapping),
                    guard.hi.xreplace(mapping),
                    substitute_guards(guard.inner, mapping),
                )
            )
        elif isinstance(guard, CallGuard):
            args = tuple(None if arg is None else arg.xreplace(mapping) for arg in guard.args)
            result.append(CallGuard(guard.function, args))
        else:
            result.append(
                Recursive(
                    guard.var,
                    guard.start.xreplace(mapping),
                    guard.k,
                    guard.threshold,
                    substitute_guards(guard.step, mapping),
                    substitute_guards(guard.base, mapping),
                )
            )
    return tuple(result)


def _integer(expr: sympy.Expr, env: Mapping[sympy.Symbol, int]) -> int:
    value = sympy.Rational(expr.xreplace({variable: sympy.Integer(number) for variable, number in env.items()}))
    return int(sympy.floor(value))


def first_violation(guards: Iterable["Guard"], env: Mapping[sympy.Symbol, int]) -> Condition | None:
    """The first guard that fails at the integer values in ``env``, or None."""
    for guard in guards:
        if isinstance(guard, Condition):
            if _integer(guard.expr, env) < 0:
                return guard
        elif isinstance(guard, ForAll):
            lo, hi = _integer(guard.lo, env), _integer(guard.hi, env)
            if lo >= hi:
                continue
            free = set().union(*(guard_symbols(inner) for inner in guard.inner))
            values = range(lo, hi) if guard.var in free else range(lo, lo + 1)
            for value in values:
                violation = first_violation(guard.inner, {**env, guard.var: value})
                if violation is not None:
                    return violation
        elif isinstance(guard, Recursive):
            level = _integer(guard.start, env)
            while level > guard.threshold:
                violation = first_violation(guard.step, {**env, guard.var: level})
                if violation is not None:
                    return violation
                level -= guard.k
            violation = first_violation(guard.base, {**env, guard.var: level})
            if violation is not None:
                return violation
        else:
            raise UnsupportedRelationError(f"guards of {guard.function} were never resolved")
    return None


def guard_symbols(guard: "Guard") -> set[sympy.Symbol]:
    if isinstance(guard, Condition):
        return set(guard.expr.free_symbols)
    if isinstance(guard, ForAll):
        inner = set().union(*(guard_symbols(item) for item in guard.inner)) - {guard.var}
        return inner | guard.lo.free_symbols | guard.hi.free_symbols
    if isinstance(guard, Recursive):
        nested = set().union(*(guard_symbols(item) for item in guard.step + guard.base)) - {guard.var}
        return nested | guard.start.free_symbols
    return set().union(*(arg.free_symbols for arg in guard.args if arg is not None))

@dataclass(frozen=True)
class BaseCase:
    """Closed form used while ``param`` is at or below ``threshold``."""

    param: str
    threshold: int
    upper: sympy.Expr
    lower: sympy.Expr


def _monomial(symbols: list[sympy.Symbol], exponents: tuple[int, ...]) -> str:
    factors = []
    for variable, power in zip(symbols, exponents):
        if power == 1:
            factors.append(variable.name)
        elif power > 1:
            factors.append(f"{variable.name}^{power}")
    return "*".join(factors)


@dataclass(frozen=True)
class CostFunction:
    """Upper and lower energy bounds, in pJ, as polynomials over a function's parameters."""

    name: str
    params: tuple[str, ...]
    upper: sympy.Expr
    lower: sympy.Expr
    base: BaseCase | None = None
    guards: tuple[Guard, ...] = ()

    @property
    def symbols(self) -> list[sympy.Symbol]:
        return [symbol(param) for param in self.params]

    def terms(self, upper: bool = True) -> list[tuple[tuple[int, ...], Fraction]]:
        """Non-zero terms in graded lexicographic order, highest first."""
        expr = sympy.expand(self.upper if upper else self.lower)
        if not self.params:
            value = to_fraction(expr)
            return [((), value)] if value else []
        poly = sympy.Poly(expr, *self.symbols)
        return [(monomial, to_fraction(coefficient)) for monomial, coefficient in poly.terms(order="grlex")]

    def degree(self, upper: bool = True) -> int:
        return max((sum(monomial) for monomial, _ in self.terms(upper)), default=0)

    def format(self, upper: bool = True) -> str:
        pieces: list[str] = []
        for monomial, coefficient in self.terms(upper):
            name = _monomial(self.symbols, monomial)
            magnitude = abs(coefficient)
            if not name:
                text = str(magnitude)
            elif magnitude == 1:
                text = name
            else:
                text = f"{magnitude}*{name}"
            if not pieces:
                pieces.append(text if coefficient > 0 else f"-{text}")
            else:
                pieces.append(f"{'+' if coefficient > 0 else '-'} {text}")
        return " ".join(pieces) or "0"

    def coefficients(self, upper: bool = True) -> list[dict[str, Any]]:
        return [
            {
                "monomial": {param: power for param, power in zip(self.params, monomial) if power},
                "coefficient": str(coefficient),
            }
            for monomial, coefficient in self.terms(upper)
        ]

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "function": self.name,
            "params": list(self.params),
            "upper": {"formula": self.format(True), "terms": self.coefficients(True)},
            "lower": {"formula": self.format(False), "terms": self.coefficients(False)},
        }
        if self.base is not None:
            data["base_case"] = {"param": self.base.param, "at_most": self.base.threshold}
        if self.guards:
            data["assumes"] = [guard.describe() for guard in self.guards]
        return data
