from __future__ import annotations

import json

import numpy as np
import pytest

from device.constants import OperandRegime
from device.domain import DeviceConfigError, DeviceError, MeasurementError
from device.services import (
    WORD_LIMIT,
    default_device,
    device_from_model,
    device_to_dict,
    expected_power,
    hamming_distance,
    load_device,
    measure_average_power,
    save_device,
    true_power,
)
from machine.parsers import parse_program
from profiler.kernels import generate_idle_kernel, generate_kernel

WORD = 0xFFFF_FFFF


def test_load_noiseless_device(fixtures_dir):
    device = load_device(fixtures_dir / "device.json")

    assert device.t_max == 8
    assert device.true_p["MUL"] == 64.0
    assert set(device.data_coeff.values()) == {0.0}


def test_device_file_round_trip(tmp_path):
    device = default_device(seed=7)
    path = tmp_path / "device.json"

    save_device(device, path)

    assert device_to_dict(load_device(path)) == device_to_dict(device)


def test_default_device_stays_in_the_data_envelope():
    device = default_device()

    assert min(device.data_coeff.values()) >= 0.05
    assert max(device.data_coeff.values()) <= 0.25


def test_true_power_follows_switching_activity():
    device = default_device()
    base = device.true_p["ADD"]
    coeff = device.data_coeff["ADD"]

    assert true_power(device, "ADD", [0, 0, 0], [WORD, WORD, WORD]) == pytest.approx(base * (1 + coeff))
    assert true_power(device, "ADD", [5, 6, 7], [5, 6, 7]) == pytest.approx(base * (1 - coeff))
    assert true_power(device, "RET", [], []) == device.true_p["RET"]


def test_true_power_checks_its_operands():
    device = default_device()

    with pytest.raises(DeviceError):
        true_power(device, "ADD", [0], [1])
    with pytest.raises(DeviceError):
        true_power(device, "NOP", [], [])


def test_hamming_distance():
    assert hamming_distance([0b1010, 0], [0b0101, 1]) == 5


def test_invalid_device_is_rejected(fixtures_dir, tmp_path):
    data = device_to_dict(load_device(fixtures_dir / "device.json"))
    data["instructions"][0]["data_coeff"] = 1.5
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps(data), encoding="utf-8")

    with pytest.raises(DeviceConfigError, match="data_coeff"):
        load_device(broken)


def test_noiseless_measurement_matches_expected_power(model):
    device = device_from_model(model, seed=3)
    kernel = generate_kernel("XOR", length=600, seed=3)

    measured = measure_average_power(device, kernel, 500, warmup_cycles=20)

    assert measured == pytest.approx(float(model.power("XOR")) + float(model.p_b))


def test_alternating_opcodes_pay_the_overhead(model):
    device = device_from_model(model, seed=3)

    assert expected_power(device, "ADD") == pytest.approx(float(model.power("ADD") * model.o + model.p_b))


def test_constrained_operands_draw_less_than_random():
    device = default_device(seed=11)
    kernel = generate_kernel("LDW", length=1200, seed=11)

    random = measure_average_power(device, kernel, 1000, warmup_cycles=20, operands=OperandRegime.RANDOM)
    constrained = measure_average_power(device, kernel, 1000, warmup_cycles=20, operands=OperandRegime.CONSTRAINED)

    assert constrained < random


def test_idle_kernel_measures_base_power(model):
    device = device_from_model(model)

    measured = measure_average_power(device, generate_idle_kernel(), 100, warmup_cycles=5)

    assert measured == pytest.approx(float(model.p_b))


def test_kernel_that_halts_cannot_be_measured(model):
    device = device_from_model(model)

    with pytest.raises(MeasurementError):
        measure_average_power(device, parse_program(".func main\n    HALT\n"), 100)


@pytest.mark.parametrize("opcode", ["ADD", "MUL", "LDW", "STW", "LDC"])
def test_random_operands_average_to_the_nominal_power(opcode):
    device = default_device(data_coeff=0.25)
    count = device.operand_count(opcode)
    rng = np.random.default_rng(2017)
    previous = rng.integers(0, WORD_LIMIT, size=(100_000, count), dtype=np.uint64).tolist()
    current = rng.integers(0, WORD_LIMIT, size=(100_000, count), dtype=np.uint64).tolist()

    average = np.mean([true_power(device, opcode, a, b) for a, b in zip(previous, current)])

    assert average == pytest.approx(device.true_p[opcode], rel=5e-3)


def test_same_seed_measures_the_same_power():
    device = default_device(seed=11)
    kernel = generate_kernel("MUL", length=900, seed=11)

    first = measure_average_power(device, kernel, 800, warmup_cycles=20, seed=5)
    second = measure_average_power(device, kernel, 800, warmup_cycles=20, seed=5)
    other = measure_average_power(device, kernel, 800, warmup_cycles=20, seed=6)

    assert first == second
    assert other != first
