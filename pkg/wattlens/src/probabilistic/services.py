from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from core.conf import default_seed, setting
from energy.domain import EnergyModel
from machine.domain import Program
from probabilistic.domain import (
    Binding,
    DistributionError,
    EnergyDistribution,
    InputDistribution,
    InputSimulationError,
    SupportTooLargeError,
    distribution_from_dict,
)
from simulator.constants import Outcome
from simulator.domain import SimulationError
from simulator.engine import run
from simulator.services import trace_energy

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], Binding]


def load_distribution(path: Path | str) -> InputDistribution:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DistributionError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return distribution_from_dict(data)


def run_energy(program: Program, model: EnergyModel, binding: Binding) -> tuple[Fraction, Outcome]:
    """Energy and outcome of simulating ``program`` on one input."""
    try:
        trace = run(program, binding)
    except SimulationError as exc:
        raise InputSimulationError(binding, str(exc)) from exc
    if trace.outcome is Outcome.FUEL_EXHAUSTED:
        raise InputSimulationError(binding, f"no result within {trace.total_cycles} cycles")
    return trace_energy(model, trace).value, trace.outcome


def _collect(
    results: Sequence[tuple[Fraction, Outcome]],
    weights: Sequence[Fraction],
    method: str,
    standard_error: float | None = None,
) -> EnergyDistribution:
    pmf: dict[Fraction, Fraction] = {}
    outcomes: dict[str, Fraction] = {}
    for (value, outcome), weight in zip(results, weights):
        pmf[value] = pmf.get(value, Fraction(0)) + weight
        outcomes[outcome.value] = outcomes.get(outcome.value, Fraction(0)) + weight
    return EnergyDistribution(
        pmf={value: weight for value, weight in pmf.items() if weight},
        outcomes=outcomes,
        runs=len(results),
        method=method,
        standard_error=standard_error,
    )


def energy_distribution_exact(
    program: Program,
    model: EnergyModel,
    distribution: InputDistribution,
    *,
    support_limit: int | None = None,
    workers: int | None = None,
) -> EnergyDistribution:
    """Energy pmf from one simulation per input, weighted by the input's probability."""
    limit = support_limit if support_limit is not None else setting("WATTLENS_SUPPORT_LIMIT", 100_000)
    if distribution.size > limit:
        raise SupportTooLargeError(distribution.size, limit)
    items = list(distribution.items())
    bindings = [binding for binding, _ in items]
    workers = workers or setting("WATTLENS_WORKERS", 1)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda binding: run_energy(program, model, binding), bindings))
    logger.info("Simulated %s inputs of %s", len(results), program.entry)
    return _collect(results, [probability for _, probability in items], "exact")


def distribution_sampler(distribution: InputDistribution) -> Sampler:
    """Draw bindings from ``distribution`` without enumerating a uniform product."""
    if distribution.ranges:
        ranges = dict(distribution.ranges)

        def uniform(rng: np.random.Generator) -> Binding:
            return {name: int(rng.integers(lo, hi + 1)) for name, (lo, hi) in ranges.items()}

        return uniform

    bindings = [binding for binding, _ in distribution.support]
    weights = np.array([float(probability) for _, probability in distribution.support])
    weights = weights / weights.sum()

    def listed(rng: np.random.Generator) -> Binding:
        return bindings[int(rng.choice(len(bindings), p=weights))]

    return listed


def energy_distribution_mc(
    program: Program,
    model: EnergyModel,
    sampler: Sampler | InputDistribution,
    n_samples: int,
    seed: int | None = None,
) -> EnergyDistribution:
    """Empirical energy pmf over ``n_samples`` seeded draws, with the standard error of its mean."""
    if n_samples < 1:
        raise DistributionError("Monte-Carlo needs at least one sample")
    if isinstance(sampler, InputDistribution):
        sampler = distribution_sampler(sampler)
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    cache: dict[tuple[tuple[str, int], ...], tuple[Fraction, Outcome]] = {}
    results = []
    for _ in range(n_samples):
        binding = sampler(rng)
        key = tuple(sorted(binding.items()))
        if key not in cache:
            cache[key] = run_energy(program, model, binding)
        results.append(cache[key])

    values = np.array([float(value) for value, _ in results])
    error = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    logger.info("Sampled %s runs of %s (%s distinct inputs)", n_samples, program.entry, len(cache))
    return _collect(results, [Fraction(1, n_samples)] * n_samples, "monte-carlo", error)


def export_histogram_csv(distribution: EnergyDistribution, path: Path | str, bins: int = 20) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["low_pj", "high_pj", "probability"])
        for low, high, probability in distribution.histogram(bins):
            writer.writerow([f"{low:.6f}", f"{high:.6f}", f"{probability:.9f}"])
