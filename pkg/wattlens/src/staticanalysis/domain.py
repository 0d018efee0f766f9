from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Iterable, Mapping

from core.errors import WattlensError
from energy.constants import Provenance
from energy.reports import EnergyReport

BlockKey = tuple[str, str]
EdgeKey = tuple[str, str, str]


class AnalysisError(WattlensError):
    """Raised when a program cannot be bounded; carries the diagnostics."""

    def __init__(self, message: str, diagnostics: Iterable[Any] = ()):
        self.diagnostics = tuple(diagnostics)
        details = "; ".join(str(diagnostic) for diagnostic in self.diagnostics)
        super().__init__(f"{message}: {details}" if details else message)


class BoundKind(str, Enum):
    UPPER = "upper"
    LOWER = "lower"


class PathCost:
    """Cost of a set of paths with the block and edge counts that produce it."""

    __slots__ = ("cost", "blocks", "edges")

    def __init__(self, cost: Fraction = Fraction(0), blocks: Counter | None = None, edges: Counter | None = None):
        self.cost = cost
        self.blocks = blocks if blocks is not None else Counter()
        self.edges = edges if edges is not None else Counter()

    def __add__(self, other: "PathCost") -> "PathCost":
        return PathCost(self.cost + other.cost, self.blocks + other.blocks, self.edges + other.edges)

    def scaled(self, factor: int) -> "PathCost":
        return PathCost(
            self.cost * factor,
            Counter({key: value * factor for key, value in self.blocks.items() if factor}),
            Counter({key: value * factor for key, value in self.edges.items() if factor}),
        )


def _block_name(key: BlockKey) -> str:
    return f"{key[0]}:{key[1]}"


@dataclass(frozen=True)
class EnergyBound:
    kind: BoundKind
    value: Fraction
    block_counts: Mapping[BlockKey, int]
    edge_counts: Mapping[EdgeKey, int]
    per_block: Mapping[BlockKey, Fraction]
    thread_level: int
    n_threads: int = 1
    idle_excluded: bool = False
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "block_counts", MappingProxyType(dict(sorted(self.block_counts.items()))))
        object.__setattr__(self, "edge_counts", MappingProxyType(dict(sorted(self.edge_counts.items()))))
        object.__setattr__(self, "per_block", MappingProxyType(dict(sorted(self.per_block.items()))))

    def count(self, function: str, label: str) -> int:
        return self.block_counts.get((function, label), 0)

    @property
    def per_function(self) -> dict[str, Fraction]:
        totals: dict[str, Fraction] = {}
        for (function, _), value in self.per_block.items():
            totals[function] = totals.get(function, Fraction(0)) + value
        return totals

    def to_report(self) -> EnergyReport:
        return EnergyReport(
            value=self.value,
            provenance=Provenance.STATIC_BOUND,
            per_block={_block_name(key): value for key, value in self.per_block.items()},
            per_function=self.per_function,
            notes=self.notes,
        )

    def to_dict(self) -> dict[str, Any]:
        data = self.to_report().to_dict()
        data.update(
            {
                "kind": self.kind.value,
                "thread_level": self.thread_level,
                "threads": self.n_threads,
                "idle_excluded": self.idle_excluded,
                "block_counts": {_block_name(key): value for key, value in self.block_counts.items()},
            }
        )
        return data


@dataclass(frozen=True)
class ProfileEntry:
    energy: Fraction
    share: float


@dataclass(frozen=True)
class StaticProfile:
    blocks: Mapping[str, ProfileEntry]
    functions: Mapping[str, ProfileEntry]
    total: Fraction
    notes: tuple[str, ...] = field(default=())

    def hottest(self, limit: int = 5) -> list[tuple[str, ProfileEntry]]:
        ranked = sorted(self.blocks.items(), key=lambda item: (-item[1].energy, item[0]))
        return ranked[:limit]

    def to_dict(self) -> dict[str, Any]:
        def entries(items: Mapping[str, ProfileEntry]) -> dict[str, dict[str, float]]:
            return {
                name: {"energy_pj": float(entry.energy), "share": entry.share}
                for name, entry in items.items()
            }

        return {
            "total_pj": float(self.total),
            "blocks": entries(self.blocks),
            "functions": entries(self.functions),
        }
