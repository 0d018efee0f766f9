from __future__ import annotations

from dataclasses import replace

import pytest

from device.constants import OperandRegime
from device.services import default_device, device_from_model, load_device
from energy.constants import PowerSource
from profiler.constants import EstimationStrategy
from profiler.kernels import ProfilingError, UnprofileableOpcodeError, generate_kernel, generate_pair_kernel
from profiler.services import (
    FitConfig,
    export_heatmap_csv,
    fit_model,
    leave_one_out_error,
    pairwise_heatmap,
)

FAST = FitConfig(duration_cycles=256, warmup_cycles=16)
PROFILED = ("ADD", "AND", "LDC", "LDW", "MUL", "SHL", "STW", "SUB", "XOR")


@pytest.fixture(scope="module")
def noiseless(fixtures_dir):
    return load_device(fixtures_dir / "device.json")


@pytest.fixture(scope="module")
def fitted(noiseless):
    return fit_model(noiseless, config=FAST)


def test_fit_recovers_noiseless_constants(noiseless, fitted):
    for opcode in PROFILED:
        assert float(fitted.power(opcode)) == pytest.approx(noiseless.true_p[opcode], rel=1e-3)
    assert float(fitted.p_b) == pytest.approx(noiseless.true_p_b, rel=1e-3)
    assert float(fitted.o) == pytest.approx(noiseless.true_o, rel=1e-3)
    for t in range(1, noiseless.t_max + 1):
        assert float(fitted.m_t[t]) == pytest.approx(noiseless.true_m_t[t], rel=1e-3)


def test_fit_estimates_what_kernels_cannot_run(fitted):
    assert sorted(fitted.estimated_opcodes()) == sorted(set(fitted.powers) - set(PROFILED))
    assert fitted.powers["BRT"].source is PowerSource.ESTIMATED
    # Nearest by features: a 16-bit non-memory instruction, ties broken by name.
    assert fitted.power("BRT") == fitted.power("ADD")


def test_average_strategy_uses_every_profiled_instruction(noiseless):
    model = fit_model(noiseless, config=replace(FAST, strategy=EstimationStrategy.AVERAGE))

    profiled = [model.power(op) for op in PROFILED]
    assert model.power("HALT") == sum(profiled) / len(profiled)


def test_random_operands_fit_close_to_the_device():
    device = default_device(seed=5)

    model = fit_model(device, config=FitConfig(duration_cycles=2048, warmup_cycles=16))

    for opcode in PROFILED:
        assert float(model.power(opcode)) == pytest.approx(device.true_p[opcode], rel=0.02)


def test_constrained_operands_fit_below_random():
    device = default_device(seed=5)

    random = fit_model(device, config=FAST)
    constrained = fit_model(device, config=replace(FAST, operands=OperandRegime.CONSTRAINED))

    for opcode in PROFILED:
        assert constrained.power(opcode) < random.power(opcode)


def test_refitting_a_fitted_model_reproduces_it(fitted):
    refitted = fit_model(device_from_model(fitted, data_coeff=0.0, seed=3), config=FAST)

    for opcode in PROFILED:
        assert float(refitted.power(opcode)) == pytest.approx(float(fitted.power(opcode)), rel=1e-3)
    assert float(refitted.p_b) == pytest.approx(float(fitted.p_b), rel=1e-3)
    assert float(refitted.o) == pytest.approx(float(fitted.o), rel=1e-3)
    for t in fitted.m_t:
        assert float(refitted.m_t[t]) == pytest.approx(float(fitted.m_t[t]), rel=1e-3)
    assert refitted.estimated_opcodes() == fitted.estimated_opcodes()


def test_feature_estimates_beat_the_average_power(model):
    # Fixture powers: arith 42..64 mW, memory 72 and 74 mW.
    feature = leave_one_out_error(model)
    average = leave_one_out_error(model, EstimationStrategy.AVERAGE)

    assert feature == pytest.approx(42 / 9)
    assert average == pytest.approx(79.5 / 9)
    assert feature < average


def test_control_flow_cannot_be_profiled():
    with pytest.raises(UnprofileableOpcodeError) as error:
        generate_kernel("BRT")

    assert error.value.opcode == "BRT"


def test_kernel_thread_count_is_limited():
    with pytest.raises(ProfilingError, match="thread count"):
        generate_pair_kernel("ADD", "SUB", 9, length=10)


def test_pair_kernel_alternates_its_opcodes():
    kernel = generate_pair_kernel("ADD", "LDW", length=4, seed=1)

    body = kernel.function("worker").block_map["body"]
    assert [instruction.opcode for instruction in body.instructions] == ["ADD", "LDW", "ADD", "LDW", "JMP"]


def test_alternating_kernels_pay_the_overhead(model, tmp_path):
    device = device_from_model(model)
    opcodes = ("ADD", "XOR", "LDW")

    heatmap = pairwise_heatmap(device, opcodes, config=FAST)

    for first in opcodes:
        for second in opcodes:
            assert heatmap[first, second] == heatmap[second, first]
            if first != second:
                assert heatmap[first, second] > (heatmap[first, first] + heatmap[second, second]) / 2
    assert heatmap.row_mean("LDW") > heatmap.row_mean("ADD")

    path = tmp_path / "heatmap.csv"
    export_heatmap_csv(heatmap, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "opcode,ADD,XOR,LDW"
    assert len(lines) == 4


def test_more_threads_lower_the_heatmap(model):
    device = device_from_model(model)

    single = pairwise_heatmap(device, ("ADD", "SUB"), config=FAST)
    double = pairwise_heatmap(device, ("ADD", "SUB"), n_threads=2, config=FAST)

    assert double.row_mean("ADD") < single.row_mean("ADD")
