from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from core.conf import default_seed
from device.constants import (
    DEFAULT_DATA_COEFF_BY_CLASS,
    DEFAULT_M_T,
    DEFAULT_OVERHEAD,
    DEFAULT_P_B_MW,
    DEFAULT_T_CLK_NS,
    DEFAULT_TRUE_POWERS_MW,
    OperandRegime,
)
from device.domain import DeviceConfigError, DeviceError, DeviceGroundTruth, MeasurementError
from energy.constants import WORD_BITS
from energy.domain import DEFAULT_ISA, EnergyModel
from machine.domain import Program
from simulator.constants import Outcome
from simulator.engine import run

logger = logging.getLogger(__name__)

WORD_LIMIT = 1 << WORD_BITS


def default_device(
    *,
    data_coeff: float | Mapping[str, float] | None = None,
    seed: int | None = None,
) -> DeviceGroundTruth:
    """The reference device; ``data_coeff`` overrides every opcode's data sensitivity."""
    if data_coeff is None:
        coeffs = {op: DEFAULT_DATA_COEFF_BY_CLASS[spec.klass] for op, spec in DEFAULT_ISA.items()}
    elif isinstance(data_coeff, Mapping):
        coeffs = dict(data_coeff)
    else:
        coeffs = {op: float(data_coeff) for op in DEFAULT_ISA}
    return DeviceGroundTruth(
        true_p=DEFAULT_TRUE_POWERS_MW,
        data_coeff=coeffs,
        true_p_b=DEFAULT_P_B_MW,
        true_o=DEFAULT_OVERHEAD,
        true_m_t={t: value for t, value in enumerate(DEFAULT_M_T, start=1)},
        true_t_clk=DEFAULT_T_CLK_NS,
        seed=default_seed() if seed is None else seed,
    )


def device_from_model(model: EnergyModel, *, data_coeff: float = 0.0, seed: int | None = None) -> DeviceGroundTruth:
    """A device whose hidden constants are exactly those of ``model``."""
    return DeviceGroundTruth(
        true_p={op: float(power) for op, power in model.p_i.items()},
        data_coeff={op: data_coeff for op in model.powers},
        true_p_b=float(model.p_b),
        true_o=float(model.o),
        true_m_t={t: float(value) for t, value in model.m_t.items()},
        true_t_clk=float(model.t_clk),
        seed=default_seed() if seed is None else seed,
        isa_meta=model.isa_meta,
    )


def device_from_dict(data: Mapping[str, Any]) -> DeviceGroundTruth:
    if not isinstance(data, dict):
        raise DeviceConfigError("device file must contain a JSON object")
    try:
        instructions = data["instructions"]
        m_t = data["m_t"]
        return DeviceGroundTruth(
            true_p={str(item["opcode"]).upper(): float(item["power_mw"]) for item in instructions},
            data_coeff={str(item["opcode"]).upper(): float(item["data_coeff"]) for item in instructions},
            true_p_b=float(data["p_b_mw"]),
            true_o=float(data["overhead"]),
            true_m_t={t: float(value) for t, value in enumerate(m_t, start=1)},
            true_t_clk=float(data["t_clk_ns"]),
            seed=int(data.get("seed", default_seed())),
        )
    except KeyError as error:
        raise DeviceConfigError(f"missing key {error.args[0]!r}") from error
    except (TypeError, ValueError) as error:
        raise DeviceConfigError(str(error)) from error


def device_to_dict(device: DeviceGroundTruth) -> dict[str, Any]:
    return {
        "seed": device.seed,
        "t_clk_ns": device.true_t_clk,
        "p_b_mw": device.true_p_b,
        "overhead": device.true_o,
        "m_t": [device.true_m_t[t] for t in range(1, device.t_max + 1)],
        "instructions": [
            {"opcode": op, "power_mw": power, "data_coeff": device.data_coeff[op]}
            for op, power in device.true_p.items()
        ],
    }


def load_device(path: Path | str) -> DeviceGroundTruth:
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise DeviceConfigError(f"{source}: malformed JSON at line {error.lineno}: {error.msg}") from error
    device = device_from_dict(data)
    logger.info("Loaded device %s (seed %s)", source, device.seed)
    return device


def save_device(device: DeviceGroundTruth, path: Path | str) -> None:
    Path(path).write_text(json.dumps(device_to_dict(device), indent=2) + "\n", encoding="utf-8")


def hamming_distance(previous: Sequence[int], current: Sequence[int]) -> int:
    return sum((int(a) ^ int(b)).bit_count() for a, b in zip(previous, current))


def true_power(
    device: DeviceGroundTruth,
    opcode: str,
    prev_operands: Sequence[int],
    operands: Sequence[int],
) -> float:
    """Instantaneous power of one instruction, in mW, before scaling and overhead."""
    if opcode not in device.true_p:
        raise DeviceError(f"unknown opcode {opcode!r}")
    count = device.operand_count(opcode)
    if len(operands) != count or len(prev_operands) != count:
        raise DeviceError(f"{opcode} takes {count} operand word(s)")
    base = device.true_p[opcode]
    if count == 0:
        return base
    width = WORD_BITS * count
    h = hamming_distance(prev_operands, operands)
    return base * (1 + device.data_coeff[opcode] * (2 * h / width - 1))


def expected_power(device: DeviceGroundTruth, opcode: str, t: int = 1) -> float:
    """Random-operand average of a cycle issuing ``opcode`` after a different opcode."""
    return device.true_m_t[t] * device.true_p[opcode] * device.true_o + device.true_p_b


class PowerMeter:
    """Measurement state of one run: the operand stream and the last issued opcode."""

    def __init__(self, device: DeviceGroundTruth, regime: OperandRegime, seed: int):
        self.device = device
        self.regime = OperandRegime(regime)
        self.rng = np.random.default_rng(seed)
        self.fixed = [int(word) for word in self.rng.integers(0, WORD_LIMIT, size=3, dtype=np.uint64)]
        self.previous_words = [0, 0, 0]
        self.previous_opcode: str | None = None
        self.current: float = 0.0

    def _words(self, count: int) -> list[int]:
        if self.regime is OperandRegime.CONSTRAINED:
            return self.fixed[:count]
        return [int(word) for word in self.rng.integers(0, WORD_LIMIT, size=count, dtype=np.uint64)]

    def cycle(self, opcode: str, act: int, stage: int) -> float:
        device = self.device
        if stage == 0:
            count = device.operand_count(opcode)
            words = self._words(count)
            self.current = true_power(device, opcode, self.previous_words[:count], words)
            self.previous_words[:count] = words
        overhead = device.true_o if opcode != self.previous_opcode else 1.0
        self.previous_opcode = opcode
        return device.true_m_t[act] * self.current * overhead + device.true_p_b


def measure_average_power(
    device: DeviceGroundTruth,
    kernel: Program,
    duration_cycles: int,
    *,
    warmup_cycles: int = 0,
    operands: OperandRegime | str = OperandRegime.RANDOM,
    seed: int | None = None,
) -> float:
    """Mean power in mW over ``duration_cycles`` after ``warmup_cycles``.

    A kernel that deadlocks leaves the device idle at base power for the rest
    of the window; a kernel that halts inside the window cannot be measured.
    """
    if duration_cycles <= 0:
        raise MeasurementError("duration must be positive")
    window = warmup_cycles + duration_cycles
    trace = run(kernel, fuel=window, t_max=device.t_max, channel_latency=0)
    if trace.outcome is Outcome.HALTED:
        raise MeasurementError(f"kernel halts early, after {trace.total_cycles} of {window} cycles")

    meter = PowerMeter(device, OperandRegime(operands), device.seed if seed is None else seed)
    power = np.full(window, device.true_p_b, dtype=np.float64)
    for event in trace.events:
        power[event.cycle] = meter.cycle(event.opcode, event.act, event.stage)
    average = float(power[warmup_cycles:].mean())
    logger.debug("Measured %.4f mW over %s cycles (%s operands)", average, duration_cycles, meter.regime.value)
    return average
