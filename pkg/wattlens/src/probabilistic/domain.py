from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Iterator, Mapping

from core.errors import WattlensError
from core.numbers import exact

Binding = Mapping[str, int]
QUANTILES = (Fraction(5, 100), Fraction(25, 100), Fraction(50, 100), Fraction(75, 100), Fraction(95, 100))
TOLERANCE = Fraction(1, 10**9)


class DistributionError(WattlensError):
    """Raised for malformed input distributions."""


class SupportTooLargeError(DistributionError):
    """Raised when exact enumeration would need more runs than allowed."""

    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"distribution has {size} inputs, the limit is {limit}; use Monte-Carlo sampling")


class InputSimulationError(DistributionError):
    """Raised when the run for one input fails; carries that input."""

    def __init__(self, binding: Binding, message: str):
        self.binding = dict(binding)
        super().__init__(f"input {self.binding}: {message}")


@dataclass(frozen=True)
class InputDistribution:
    """Finite distribution over input bindings, either listed or a uniform product."""

    support: tuple[tuple[Binding, Fraction], ...] = ()
    ranges: Mapping[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if bool(self.support) == bool(self.ranges):
            raise DistributionError("give either an explicit support or uniform ranges")
        for name, (lo, hi) in self.ranges.items():
            if hi < lo:
                raise DistributionError(f"empty range {lo}..{hi} for {name}")
        if self.support:
            if any(probability < 0 for _, probability in self.support):
                raise DistributionError("probabilities must be non-negative")
            total = sum((probability for _, probability in self.support), Fraction(0))
            if abs(total - 1) > TOLERANCE:
                raise DistributionError(f"probabilities sum to {float(total)}, not 1")
        object.__setattr__(self, "ranges", MappingProxyType(dict(self.ranges)))

    @classmethod
    def point(cls, binding: Binding) -> "InputDistribution":
        return cls(support=((dict(binding), Fraction(1)),))

    @classmethod
    def uniform(cls, ranges: Mapping[str, tuple[int, int]]) -> "InputDistribution":
        return cls(ranges={name: (int(lo), int(hi)) for name, (lo, hi) in sorted(ranges.items())})

    @property
    def size(self) -> int:
        if self.support:
            return len(self.support)
        return math.prod(hi - lo + 1 for lo, hi in self.ranges.values())

    def items(self) -> Iterator[tuple[Binding, Fraction]]:
        if self.support:
            yield from self.support
            return
        names = list(self.ranges)
        probability = Fraction(1, self.size)
        for values in itertools.product(*(range(lo, hi + 1) for lo, hi in self.ranges.values())):
            yield dict(zip(names, values)), probability


def distribution_from_dict(data: Mapping[str, Any]) -> InputDistribution:
    """Read ``{"support": [{"inputs": {...}, "p": 0.5}, ...]}`` or ``{"uniform": {"r0": [0, 15]}}``."""
    if "uniform" in data:
        try:
            ranges = {name: (int(span[0]), int(span[1])) for name, span in data["uniform"].items()}
        except (TypeError, ValueError, IndexError, AttributeError) as exc:
            raise DistributionError(f"invalid uniform ranges: {exc}") from exc
        return InputDistribution.uniform(ranges)
    if "support" not in data:
        raise DistributionError("distribution needs a 'support' or 'uniform' key")
    support = []
    for position, entry in enumerate(data["support"]):
        try:
            binding = {name: int(value) for name, value in entry["inputs"].items()}
            raw = entry["p"]
            probability = Fraction(raw) if isinstance(raw, str) else exact(raw)
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DistributionError(f"support[{position}]: {exc}") from exc
        support.append((binding, probability))
    return InputDistribution(support=tuple(support))


@dataclass(frozen=True)
class EnergyDistribution:
    """Probability of each energy value in pJ, with the outcomes of the runs behind it."""

    pmf: Mapping[Fraction, Fraction]
    outcomes: Mapping[str, Fraction]
    runs: int
    method: str = "exact"
    standard_error: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "pmf", MappingProxyType(dict(sorted(self.pmf.items()))))
        object.__setattr__(self, "outcomes", MappingProxyType(dict(sorted(self.outcomes.items()))))

    @property
    def mean(self) -> Fraction:
        return sum((energy * probability for energy, probability in self.pmf.items()), Fraction(0))

    @property
    def variance(self) -> Fraction:
        mean = self.mean
        return sum(((energy - mean) ** 2 * probability for energy, probability in self.pmf.items()), Fraction(0))

    @property
    def min(self) -> Fraction:
        return next(iter(self.pmf))

    @property
    def max(self) -> Fraction:
        return next(reversed(list(self.pmf)))

    def quantile(self, q: Fraction | float) -> Fraction:
        """Smallest energy whose cumulative probability reaches ``q``."""
        q = exact(q)
        cumulative = Fraction(0)
        for energy, probability in self.pmf.items():
            cumulative += probability
            if cumulative >= q:
                return energy
        return self.max

    def summary(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "mean_pj": float(self.mean),
            "variance_pj2": float(self.variance),
            "min_pj": float(self.min),
            "max_pj": float(self.max),
            "quantiles_pj": {f"p{int(q * 100)}": float(self.quantile(q)) for q in QUANTILES},
        }
        if self.standard_error is not None:
            data["standard_error_pj"] = self.standard_error
        return data

    def histogram(self, bins: int = 20) -> list[tuple[float, float, float]]:
        """Equal-width bins between min and max as (low pJ, high pJ, probability)."""
        low, high = float(self.min), float(self.max)
        if bins < 1:
            raise DistributionError("histogram needs at least one bin")
        width = (high - low) / bins or 1.0
        masses = [Fraction(0)] * bins
        for energy, probability in self.pmf.items():
            index = min(bins - 1, int((float(energy) - low) / width))
            masses[index] += probability
        return [(low + index * width, low + (index + 1) * width, float(mass)) for index, mass in enumerate(masses)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "runs": self.runs,
            "summary": self.summary(),
            "outcomes": {name: float(probability) for name, probability in self.outcomes.items()},
            "pmf": [[float(energy), float(probability)] for energy, probability in self.pmf.items()],
        }
