from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from core.errors import WattlensError
from device.constants import DATA_COEFF_ENVELOPE
from energy.domain import DEFAULT_ISA, InstructionSpec

logger = logging.getLogger(__name__)


class DeviceError(WattlensError):
    """Base class for synthetic device errors."""


class DeviceConfigError(DeviceError):
    """Raised when a device description is malformed or inconsistent."""


class MeasurementError(DeviceError):
    """Raised when a kernel cannot be measured."""


@dataclass(frozen=True)
class DeviceGroundTruth:
    """The hidden constants of the synthetic device, in mW and ns.

    ``data_coeff`` is the largest relative deviation data can cause: an
    instruction whose operands do not switch a single bit runs at
    ``true_p * (1 - data_coeff)``, one that flips all of them at
    ``true_p * (1 + data_coeff)``.
    """

    true_p: Mapping[str, float]
    data_coeff: Mapping[str, float]
    true_p_b: float
    true_o: float
    true_m_t: Mapping[int, float]
    true_t_clk: float
    seed: int
    isa_meta: Mapping[str, InstructionSpec] = field(default=DEFAULT_ISA)

    def __post_init__(self) -> None:
        object.__setattr__(self, "true_p", MappingProxyType(dict(sorted(self.true_p.items()))))
        object.__setattr__(self, "data_coeff", MappingProxyType(dict(sorted(self.data_coeff.items()))))
        object.__setattr__(self, "true_m_t", MappingProxyType(dict(sorted(self.true_m_t.items()))))
        self._validate()

    def _validate(self) -> None:
        if self.true_t_clk <= 0:
            raise DeviceConfigError("t_clk_ns must be > 0")
        if self.true_p_b < 0:
            raise DeviceConfigError("p_b_mw must be >= 0")
        if self.true_o <= 0:
            raise DeviceConfigError("overhead must be > 0")
        if sorted(self.true_m_t) != list(range(1, len(self.true_m_t) + 1)) or not self.true_m_t:
            raise DeviceConfigError("m_t must be defined for t = 1..t_max without gaps")
        if set(self.true_p) != set(self.isa_meta):
            missing = sorted(set(self.isa_meta) ^ set(self.true_p))
            raise DeviceConfigError(f"instructions do not match the ISA: {', '.join(missing)}")
        for opcode in self.true_p:
            coeff = self.data_coeff.get(opcode)
            if coeff is None:
                raise DeviceConfigError(f"{opcode}: missing data_coeff")
            if not 0 <= coeff < 1:
                raise DeviceConfigError(f"{opcode}: data_coeff must be within [0, 1), got {coeff}")
            if coeff > DATA_COEFF_ENVELOPE[1]:
                logger.warning(
                    "%s: data_coeff %.3f is outside the %.2f..%.2f envelope",
                    opcode,
                    coeff,
                    *DATA_COEFF_ENVELOPE,
                )
            if self.true_p[opcode] < 0:
                raise DeviceConfigError(f"{opcode}: power must be >= 0")

    @property
    def t_max(self) -> int:
        return len(self.true_m_t)

    def operand_count(self, opcode: str) -> int:
        try:
            return self.isa_meta[opcode].operand_count
        except KeyError:
            raise DeviceError(f"unknown opcode {opcode!r}") from None
