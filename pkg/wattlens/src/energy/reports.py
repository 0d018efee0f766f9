from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Mapping

from energy.constants import Provenance
from energy.domain import ExecutionStats

IDLE_KEY = "<idle>"


@dataclass(frozen=True)
class EnergyReport:
    """An energy value in pJ with its breakdown and where it came from."""

    value: Fraction
    provenance: Provenance
    per_block: Mapping[str, Fraction] = field(default_factory=dict)
    per_function: Mapping[str, Fraction] = field(default_factory=dict)
    stats: ExecutionStats | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_block", MappingProxyType(dict(sorted(self.per_block.items()))))
        object.__setattr__(self, "per_function", MappingProxyType(dict(sorted(self.per_function.items()))))

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "energy_pj": float(self.value),
            "provenance": self.provenance.value,
            "per_block_pj": {key: float(value) for key, value in self.per_block.items()},
            "per_function_pj": {key: float(value) for key, value in self.per_function.items()},
        }
        if self.stats is not None:
            data["stats"] = self.stats.to_dict()
        if self.notes:
            data["notes"] = list(self.notes)
        return data
