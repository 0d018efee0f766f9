from __future__ import annotations

from fractions import Fraction

import pytest

from probabilistic.domain import (
    DistributionError,
    InputDistribution,
    InputSimulationError,
    SupportTooLargeError,
    distribution_from_dict,
)
from probabilistic.services import (
    energy_distribution_exact,
    energy_distribution_mc,
    export_histogram_csv,
    load_distribution,
    run_energy,
)
from staticanalysis.services import bcec, wcec


def test_exact_distribution_weights_each_input(program, model, fixtures_dir):
    fib = program("fib.eir")
    distribution = load_distribution(fixtures_dir / "fib_inputs.json")

    result = energy_distribution_exact(fib, model, distribution)

    expected = sum(run_energy(fib, model, binding)[0] * p for binding, p in distribution.items())
    assert result.mean == expected
    assert len(result.pmf) == 4
    assert sum(result.pmf.values()) == 1
    assert result.pmf[result.min] == Fraction(1, 10)
    assert result.outcomes == {"halted": 1}


def test_uniform_distribution_stays_within_the_bounds(program, model, fixtures_dir):
    absdiff = program("absdiff.eir")
    distribution = load_distribution(fixtures_dir / "absdiff_uniform.json")

    result = energy_distribution_exact(absdiff, model, distribution)

    assert distribution.size == 256
    assert result.runs == 256
    assert result.min == bcec(absdiff, None, model).value
    assert result.max == wcec(absdiff, None, model).value
    assert result.quantile(0) == result.min
    assert result.quantile(1) == result.max


def test_point_distribution_has_no_variance(program, model):
    result = energy_distribution_exact(program("fib.eir"), model, InputDistribution.point({"r0": 4}))

    assert result.variance == 0
    assert result.min == result.max == result.mean


def test_workers_do_not_change_the_result(program, model):
    absdiff = program("absdiff.eir")
    distribution = InputDistribution.uniform({"r0": (0, 7), "r1": (0, 7)})

    serial = energy_distribution_exact(absdiff, model, distribution, workers=1)
    parallel = energy_distribution_exact(absdiff, model, distribution, workers=4)

    assert parallel.pmf == serial.pmf


def test_support_limit(program, model):
    distribution = InputDistribution.uniform({"r0": (0, 15), "r1": (0, 15)})

    with pytest.raises(SupportTooLargeError):
        energy_distribution_exact(program("absdiff.eir"), model, distribution, support_limit=100)


def test_monte_carlo_approaches_the_exact_mean(program, model):
    absdiff = program("absdiff.eir")
    distribution = InputDistribution.uniform({"r0": (0, 15), "r1": (0, 15)})
    exact = energy_distribution_exact(absdiff, model, distribution)

    sampled = energy_distribution_mc(absdiff, model, distribution, 2000, seed=2017)

    assert sampled.method == "monte-carlo"
    assert sampled.runs == 2000
    assert abs(float(sampled.mean - exact.mean)) <= 4 * sampled.standard_error
    assert set(sampled.pmf) <= set(exact.pmf)


def test_monte_carlo_is_reproducible(program, model, fixtures_dir):
    fib = program("fib.eir")
    distribution = load_distribution(fixtures_dir / "fib_inputs.json")

    first = energy_distribution_mc(fib, model, distribution, 200, seed=3)
    second = energy_distribution_mc(fib, model, distribution, 200, seed=3)

    assert first.pmf == second.pmf


def test_deadlocks_are_counted_as_outcomes(program, model):
    result = energy_distribution_exact(program("deadlock.eir"), model, InputDistribution.point({}))

    assert result.outcomes == {"deadlock": 1}


def test_runaway_input_is_reported(program, model, settings):
    settings.WATTLENS_FUEL = 500

    with pytest.raises(InputSimulationError, match="no result"):
        run_energy(program("spin.eir"), model, {})


@pytest.mark.parametrize(
    "data",
    [
        {},
        {"uniform": {"r0": [5, 1]}},
        {"support": [{"inputs": {"r0": 1}, "p": 0.5}]},
        {"support": [{"inputs": {"r0": 1}}]},
        {"support": [{"inputs": {"r0": 1}, "p": 1.5}, {"inputs": {"r0": 2}, "p": -0.5}]},
    ],
)
def test_invalid_distributions(data):
    with pytest.raises(DistributionError):
        distribution_from_dict(data)


def test_histogram_export(program, model, tmp_path):
    result = energy_distribution_exact(
        program("absdiff.eir"), model, InputDistribution.uniform({"r0": (0, 15), "r1": (0, 15)})
    )
    path = tmp_path / "histogram.csv"

    export_histogram_csv(result, path, bins=4)

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "low_pj,high_pj,probability"
    assert len(lines) == 5
    assert sum(probability for _, _, probability in result.histogram(4)) == pytest.approx(1.0)
