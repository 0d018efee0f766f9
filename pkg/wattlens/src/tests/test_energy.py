from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from energy.constants import Monotonicity, PowerSource
from energy.domain import ExecutionStats, ModelParseError, ModelValidationError, ThreadCountError, UnknownOpcodeError
from energy.services import (
    dump_model,
    energy,
    idle_energy,
    instruction_energy,
    load_model,
    model_from_dict,
    model_to_dict,
    save_model,
)
from machine.parsers import parse_program
from simulator.engine import run
from simulator.services import stats_of, trace_energy

BODY_OPCODES = ("ADD", "SUB", "MUL", "AND", "XOR", "SHL", "LDW", "STW")


def test_instruction_energy_is_exact(model):
    assert instruction_energy(model, "ADD", 1) == Fraction("208.125")
    assert instruction_energy(model, "MUL", 2) == Fraction("224.8")
    assert idle_energy(model, 3) == 150


def test_energy_sums_every_term(model):
    stats = ExecutionStats(n_it={("ADD", 1): 4, ("MUL", 2): 2}, n_idl=5)

    expected = 4 * instruction_energy(model, "ADD", 1) + 2 * instruction_energy(model, "MUL", 2) + idle_energy(model, 5)
    assert energy(model, stats) == expected
    assert stats.total_cycles == 11


def test_energy_of_no_work_is_zero(model):
    assert energy(model, ExecutionStats.zero()) == 0


def test_execution_stats_add_and_export():
    first = ExecutionStats.from_counts([("ADD", 1), ("ADD", 1), ("LDC", 2)], n_idl=1)
    second = ExecutionStats(n_it={("ADD", 1): 1})

    merged = first + second

    assert merged.n_it == {("ADD", 1): 3, ("LDC", 2): 1}
    assert merged.n_idl == 1
    assert merged.issues_of("ADD") == 3
    assert merged.to_dict() == {"n_it": {"ADD": {"1": 3}, "LDC": {"2": 1}}, "n_idl": 1, "total_cycles": 5}


def test_execution_stats_rejects_inconsistent_totals():
    with pytest.raises(ValueError):
        ExecutionStats(n_it={("ADD", 1): 2}, n_idl=1, total_cycles=4)


def test_thread_level_outside_model_is_rejected(model):
    with pytest.raises(ThreadCountError):
        instruction_energy(model, "ADD", model.t_max + 1)
    with pytest.raises(ThreadCountError):
        model.conservative_thread_level(0, upper=True)


def test_unknown_opcode(model):
    with pytest.raises(UnknownOpcodeError):
        energy(model, ExecutionStats(n_it={("NOP", 1): 1}))


def test_conservative_thread_level_follows_m_t(model):
    assert model.m_t_direction is Monotonicity.NON_INCREASING
    assert model.conservative_thread_level(4, upper=True) == 1
    assert model.conservative_thread_level(4, upper=False) == 4


def test_model_file_round_trip_is_bit_exact(model, tmp_path):
    path = tmp_path / "model.json"
    save_model(model, path)

    reloaded = load_model(path)

    assert reloaded == model
    assert dump_model(reloaded) == path.read_text(encoding="utf-8")


def test_float_constants_read_as_their_decimal(model):
    assert model.o == Fraction("1.15")
    assert model.m_t[2] == Fraction("0.95")
    assert model.powers["BRT"].source is PowerSource.ESTIMATED


def test_malformed_json_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"t_clk_ns": 2.5,\n  oops}', encoding="utf-8")

    with pytest.raises(ModelParseError, match="line 2"):
        load_model(path)


@pytest.mark.parametrize(
    "change, field",
    [
        ({"t_clk_ns": 0}, "t_clk_ns"),
        ({"overhead": -1}, "overhead"),
        ({"m_t": [1, 0.9, 0.95, 0.8, 0.8, 0.8, 0.8, 0.8]}, "m_t"),
        ({"m_t": [1, 0.9]}, "m_t"),
    ],
)
def test_invalid_models_name_the_field(model, change, field):
    data = {**model_to_dict(model), **change}

    with pytest.raises(ModelValidationError) as error:
        model_from_dict(data)

    assert error.value.field == field


def test_negative_power_is_rejected(model):
    data = model_to_dict(model)
    data["instructions"][0]["power_mw"] = -1

    with pytest.raises(ModelValidationError, match="power_mw"):
        model_from_dict(json.loads(json.dumps(data)))


def _body(rng: np.random.Generator) -> list[str]:
    lines = []
    for opcode in rng.choice(BODY_OPCODES, size=int(rng.integers(1, 7))):
        dst, a, b = (f"r{int(n)}" for n in rng.choice([3, 4, 6], size=3))
        if opcode == "LDW":
            lines.append(f"    LDW {dst}, r5, {int(rng.integers(0, 8))}")
        elif opcode == "STW":
            lines.append(f"    STW {a}, r5, {int(rng.integers(0, 8))}")
        else:
            lines.append(f"    {opcode} {dst}, {a}, {b}")
    return lines


def random_program(seed: int) -> str:
    """A forking, sometimes communicating, program drawn from ``seed``."""
    rng = np.random.default_rng(seed)
    lines = [".func main", "    LDC r5, 16"]
    for _ in range(int(rng.integers(0, 4))):
        lines += [f"    LDC r0, {int(rng.integers(1, 9))}", "    FORK r0, worker"]
    talks = bool(rng.integers(0, 2))
    if talks:
        lines += [f"    LDC r0, {int(rng.integers(0, 100))}", "    FORK r0, producer", "    IN r7, 0"]
    lines += [f"    LDC r1, {int(rng.integers(1, 9))}", "    LDC r2, 1", "loop:"]
    lines += _body(rng)
    lines += ["    SUB r1, r1, r2", "    @bound 0..7", "    BRT r1, loop", "    HALT"]
    lines += [".func worker r0", "    LDC r5, 16", "    LDC r2, 1", "wloop:"]
    lines += _body(rng)
    lines += ["    SUB r0, r0, r2", "    @bound 0..7", "    BRT r0, wloop", "    RET"]
    if talks:
        lines += [".func producer r0", "    OUT r0, 0", "    RET"]
    return "\n".join(lines) + "\n"


def reference_energy(model, trace) -> Fraction:
    """Energy summed cycle by cycle straight from the model constants."""
    busy = sum(
        (
            (model.m_t[event.act] * model.power(event.opcode) * model.o + model.p_b) * model.t_clk
            for event in trace.events
        ),
        Fraction(0),
    )
    idle_cycles = trace.total_cycles - len(trace.events)
    return busy + idle_cycles * model.p_b * model.t_clk


@pytest.mark.parametrize("seed", range(100))
def test_trace_energy_matches_cycle_by_cycle_sum(model, seed):
    trace = run(parse_program(random_program(seed)), channel_latency=2)

    assert trace.halted
    assert trace_energy(model, trace).value == reference_energy(model, trace)
    assert energy(model, stats_of(trace)) == reference_energy(model, trace)


def test_idle_cycles_are_charged_at_base_power(model):
    texts = [random_program(seed) for seed in range(100)]
    traces = [run(parse_program(text), channel_latency=4) for text in texts if "producer" in text]

    assert any(trace.total_cycles > len(trace.events) for trace in traces)
    for trace in traces:
        assert trace_energy(model, trace).value == reference_energy(model, trace)


@pytest.mark.parametrize("seeds", [(0, 1), (2, 3), (4, 5), (6, 7)])
def test_energy_adds_over_disjoint_runs(model, seeds):
    first, second = (stats_of(run(parse_program(random_program(seed)))) for seed in seeds)

    assert energy(model, first + second) == energy(model, first) + energy(model, second)


@pytest.mark.parametrize("seed", range(10))
def test_one_more_issue_costs_exactly_its_instruction_energy(model, seed):
    stats = stats_of(run(parse_program(random_program(seed))))
    base = energy(model, stats)

    for opcode, t in stats.n_it:
        grown = energy(model, stats + ExecutionStats(n_it={(opcode, t): 1}))
        assert grown - base == instruction_energy(model, opcode, t)
        assert grown > base
    assert energy(model, stats + ExecutionStats(n_it={}, n_idl=1)) == base + idle_energy(model, 1)
