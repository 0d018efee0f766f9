from __future__ import annotations

from decimal import Decimal
from fractions import Fraction


def exact(value: int | float | str | Decimal | Fraction) -> Fraction:
    """Convert a numeric value to the exact rational of its shortest decimal form.

    Floats go through ``repr`` so that ``float(exact(x)) == x`` and a value
    written back to JSON reads in again as the same rational.
    """
    if isinstance(value, bool):
        raise TypeError("boolean is not a numeric constant")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(Decimal(repr(value)))
    if isinstance(value, (str, Decimal)):
        return Fraction(Decimal(value))
    raise TypeError(f"unsupported numeric type: {type(value).__name__}")


def to_json_number(value: Fraction) -> int | float:
    if value.denominator == 1:
        return int(value)
    return float(value)


def canonical(value: int | float | str | Decimal | Fraction) -> Fraction:
    """Exact value as it will read back from a JSON file."""
    return exact(to_json_number(exact(value)))
