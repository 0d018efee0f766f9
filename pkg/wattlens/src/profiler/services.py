from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from core.conf import setting
from core.numbers import exact
from device.constants import OperandRegime
from device.domain import DeviceGroundTruth
from device.services import measure_average_power
from energy.constants import PowerSource
from energy.domain import DEFAULT_ISA, EnergyModel, InstructionPower, InstructionSpec
from profiler.constants import REFERENCE_OPCODE, EstimationStrategy
from profiler.kernels import (
    ProfilingError,
    generate_idle_kernel,
    generate_pair_kernel,
    kernel_length,
    kernel_warmup,
)

logger = logging.getLogger(__name__)


class SingularFitError(ProfilingError):
    """Raised when the measurements do not determine a model constant."""


@dataclass(frozen=True)
class FitConfig:
    duration_cycles: int = field(default_factory=lambda: setting("WATTLENS_PROFILE_DURATION", 4096))
    warmup_cycles: int = field(default_factory=lambda: setting("WATTLENS_PROFILE_WARMUP", 64))
    operands: OperandRegime = OperandRegime.RANDOM
    reference_opcode: str = REFERENCE_OPCODE
    strategy: EstimationStrategy = EstimationStrategy.FEATURE


class Session:
    """Measurements of one device with one measurement window."""

    def __init__(self, device: DeviceGroundTruth, config: FitConfig, isa_meta: Mapping[str, InstructionSpec]):
        self.device = device
        self.config = config
        self.isa_meta = isa_meta

    def measure_pair(self, first: str, second: str, n_threads: int = 1) -> float:
        config = self.config
        kernel = generate_pair_kernel(
            first,
            second,
            n_threads,
            length=kernel_length(n_threads, config.warmup_cycles, config.duration_cycles),
            seed=self.device.seed,
            t_max=self.device.t_max,
            isa_meta=self.isa_meta,
        )
        return measure_average_power(
            self.device,
            kernel,
            config.duration_cycles,
            warmup_cycles=kernel_warmup(n_threads, config.warmup_cycles),
            operands=config.operands,
        )

    def measure(self, opcode: str, n_threads: int = 1) -> float:
        return self.measure_pair(opcode, opcode, n_threads)

    def measure_idle(self) -> float:
        return measure_average_power(
            self.device,
            generate_idle_kernel(),
            self.config.duration_cycles,
            warmup_cycles=self.config.warmup_cycles,
        )


def _profiled(isa_meta: Mapping[str, InstructionSpec]) -> list[str]:
    return sorted(op for op, spec in isa_meta.items() if spec.profileable)


def _feature_distance(a: InstructionSpec, b: InstructionSpec) -> tuple[int, int, int, int]:
    return (
        int(a.klass != b.klass),
        int(a.mem_access != b.mem_access),
        int(a.encoding_bits != b.encoding_bits),
        abs(a.operand_count - b.operand_count),
    )


def _estimate(
    candidates: Sequence[tuple[InstructionSpec, Fraction]],
    spec: InstructionSpec,
    strategy: EstimationStrategy,
) -> Fraction:
    if not candidates:
        raise ProfilingError("no profiled instruction to estimate from")
    strategy = EstimationStrategy(strategy)
    if strategy is EstimationStrategy.FEATURE:
        nearest = min(candidates, key=lambda item: (_feature_distance(item[0], spec), item[0].opcode))
        return nearest[1]
    if strategy is EstimationStrategy.OPERAND_COUNT:
        same = [power for other, power in candidates if other.operand_count == spec.operand_count]
        if same:
            return sum(same, Fraction(0)) / len(same)
    return sum((power for _, power in candidates), Fraction(0)) / len(candidates)


def _candidates(model: EnergyModel, exclude: str | None = None) -> list[tuple[InstructionSpec, Fraction]]:
    return [
        (model.isa_meta[op], entry.power)
        for op, entry in model.powers.items()
        if entry.source is PowerSource.PROFILED and op != exclude
    ]


def estimate_unprofiled(
    model: EnergyModel,
    spec: InstructionSpec,
    strategy: EstimationStrategy | str = EstimationStrategy.FEATURE,
) -> InstructionPower:
    """Power of an instruction no kernel can measure, from the profiled ones.

    The feature strategy picks the profiled instruction nearest in
    (class, memory access, encoding width, operand count), compared in that
    order; ties go to the lowest opcode name.
    """
    power = _estimate(_candidates(model, exclude=spec.opcode), spec, EstimationStrategy(strategy))
    return InstructionPower(power, PowerSource.ESTIMATED)


def leave_one_out_error(
    model: EnergyModel,
    strategy: EstimationStrategy | str = EstimationStrategy.FEATURE,
) -> float:
    """Mean absolute error, in mW, of estimating each profiled power from the others."""
    profiled = [op for op, entry in model.powers.items() if entry.source is PowerSource.PROFILED]
    if len(profiled) < 2:
        raise ProfilingError("leave-one-out needs at least two profiled instructions")
    errors = [
        abs(_estimate(_candidates(model, exclude=op), model.isa_meta[op], EstimationStrategy(strategy)) - model.power(op))
        for op in profiled
    ]
    return float(sum(errors, Fraction(0)) / len(errors))


def _project_monotone(m_t: list[float]) -> list[float]:
    if m_t[-1] <= m_t[0]:
        projected = list(itertools.accumulate(m_t, min))
    else:
        projected = list(itertools.accumulate(m_t, max))
    if projected != m_t:
        logger.warning("Fitted M_t %s is not monotone; projected to %s", m_t, projected)
    return projected


def _fit_overhead(session: Session, powers: Mapping[str, float], p_b: float) -> float:
    single_issue = [op for op in sorted(powers) if session.isa_meta[op].issue_cycles == 1]
    pairs = list(itertools.combinations(single_issue, 2))
    if not pairs:
        raise SingularFitError("overhead needs two single-issue profileable instructions")
    x = np.array([(powers[a] + powers[b]) / 2 for a, b in pairs])
    y = np.array([session.measure_pair(a, b) - p_b for a, b in pairs])
    solution, _, rank, _ = np.linalg.lstsq(x.reshape(-1, 1), y, rcond=None)
    if rank < 1:
        raise SingularFitError("alternating kernels do not determine the overhead")
    return float(solution[0])


def fit_model(
    device: DeviceGroundTruth,
    isa_meta: Mapping[str, InstructionSpec] = DEFAULT_ISA,
    config: FitConfig | None = None,
) -> EnergyModel:
    """Reconstruct an energy model from kernel measurements on ``device``.

    Same-opcode kernels run free of inter-instruction overhead, so they give
    P_i directly with M_1 fixed to 1. The overhead comes from alternating
    kernels by least squares and M_t from n-thread kernels of the reference
    opcode.
    """
    config = config or FitConfig()
    session = Session(device, config, isa_meta)
    profiled = _profiled(isa_meta)
    if not profiled:
        raise ProfilingError("no profileable instruction in the ISA")

    p_b = session.measure_idle()
    powers: dict[str, float] = {}
    for opcode in profiled:
        power = session.measure(opcode) - p_b
        if power < 0:
            logger.warning("%s measured below base power; clamped to 0", opcode)
            power = 0.0
        powers[opcode] = power
    logger.info("Profiled %s instructions over %s cycles each", len(powers), config.duration_cycles)

    overhead = _fit_overhead(session, powers, p_b)

    reference = config.reference_opcode if config.reference_opcode in powers else profiled[0]
    if powers[reference] == 0:
        raise SingularFitError(f"reference instruction {reference} draws no power")
    m_t = [1.0]
    for n_threads in range(2, device.t_max + 1):
        m_t.append((session.measure(reference, n_threads) - p_b) / powers[reference])
    m_t = _project_monotone(m_t)

    draft = EnergyModel(
        t_clk=exact(device.true_t_clk),
        p_b=exact(p_b),
        o=exact(overhead),
        powers={op: InstructionPower(exact(power), PowerSource.PROFILED) for op, power in powers.items()},
        m_t={t: exact(value) for t, value in enumerate(m_t, start=1)},
        t_max=device.t_max,
        isa_meta={op: isa_meta[op] for op in powers},
    )
    all_powers = dict(draft.powers)
    for opcode, spec in isa_meta.items():
        if opcode not in all_powers:
            all_powers[opcode] = estimate_unprofiled(draft, spec, config.strategy)
    model = EnergyModel(
        t_clk=draft.t_clk,
        p_b=draft.p_b,
        o=draft.o,
        powers=all_powers,
        m_t=draft.m_t,
        t_max=draft.t_max,
        isa_meta=isa_meta,
    )
    logger.info(
        "Fitted model: P_b=%.4f mW, O=%.4f, %s estimated instructions",
        p_b,
        overhead,
        len(model.estimated_opcodes()),
    )
    return model


@dataclass(frozen=True)
class Heatmap:
    opcodes: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    def __getitem__(self, key: tuple[str, str]) -> float:
        first, second = key
        return self.values[self.opcodes.index(first)][self.opcodes.index(second)]

    def row_mean(self, opcode: str) -> float:
        row = self.values[self.opcodes.index(opcode)]
        return sum(row) / len(row)


def pairwise_heatmap(
    device: DeviceGroundTruth,
    opcodes: Iterable[str],
    n_threads: int = 1,
    config: FitConfig | None = None,
    isa_meta: Mapping[str, InstructionSpec] = DEFAULT_ISA,
) -> Heatmap:
    """Average power of every kernel alternating two of ``opcodes``."""
    session = Session(device, config or FitConfig(), isa_meta)
    names = tuple(opcodes)
    size = len(names)
    values = [[0.0] * size for _ in range(size)]
    for i, j in itertools.combinations_with_replacement(range(size), 2):
        values[i][j] = values[j][i] = session.measure_pair(names[i], names[j], n_threads)
    logger.info("Measured %s-instruction heat map at %s thread(s)", size, n_threads)
    return Heatmap(opcodes=names, values=tuple(tuple(row) for row in values))


def export_heatmap_csv(heatmap: Heatmap, path: Path | str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["opcode", *heatmap.opcodes])
        for opcode, row in zip(heatmap.opcodes, heatmap.values):
            writer.writerow([opcode, *(f"{value:.6f}" for value in row)])
