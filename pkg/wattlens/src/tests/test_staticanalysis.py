from __future__ import annotations

import pytest

from energy.reports import IDLE_KEY
from machine.cfg import build_cfg
from machine.parsers import parse_program
from simulator.engine import run
from simulator.services import trace_energy
from staticanalysis.domain import AnalysisError, BoundKind
from staticanalysis.services import bcec, call_graph, static_profile, wcec

from .conftest import MULTI_THREADED, SINGLE_PATH, SINGLE_THREADED, domain_inputs

RECURSIVE = """\
.func main
    CALL r0, down
    RET
.func down r0
    CALL r0, down
    RET
"""


def simulated(program, model):
    return [trace_energy(model, run(program, inputs)).value for inputs in domain_inputs(program)]


@pytest.mark.parametrize("name", SINGLE_THREADED)
def test_bounds_enclose_every_run(program, model, name):
    parsed = program(name)
    cfg = build_cfg(parsed)
    upper = wcec(parsed, cfg, model)
    lower = bcec(parsed, cfg, model)

    energies = simulated(parsed, model)

    assert lower.value <= min(energies)
    assert max(energies) <= upper.value
    assert not upper.idle_excluded


@pytest.mark.parametrize("name", SINGLE_PATH)
def test_single_path_bounds_are_exact(program, model, name):
    parsed = program(name)

    value = trace_energy(model, run(parsed)).value

    assert wcec(parsed, None, model).value == value
    assert bcec(parsed, None, model).value == value


@pytest.mark.parametrize("name", ["fib.eir", "absdiff.eir"])
def test_bounds_are_reached(program, model, name):
    parsed = program(name)

    energies = simulated(parsed, model)

    assert wcec(parsed, None, model).value == max(energies)
    assert bcec(parsed, None, model).value == min(energies)


@pytest.mark.parametrize("name, threads", sorted(MULTI_THREADED.items()))
def test_forking_programs_stay_within_single_thread_bound(program, model, name, threads):
    parsed = program(name)
    upper = wcec(parsed, None, model)
    lower = bcec(parsed, None, model, n_threads=threads)

    for inputs in domain_inputs(parsed):
        report = trace_energy(model, run(parsed, inputs))
        busy = report.value - report.per_block.get(IDLE_KEY, 0)

        assert lower.value <= busy <= upper.value, inputs
    assert lower.idle_excluded
    assert any("forked" in note for note in upper.notes)


def test_bound_suite_covers_threads_and_channels(program):
    suite = [program(name) for name in (*SINGLE_THREADED, *MULTI_THREADED)]

    assert len(suite) >= 20
    assert all(len(domain_inputs(parsed)) <= 2**12 for parsed in suite)
    opcodes = set().union(*(parsed.opcodes() for parsed in suite))
    assert {"FORK", "IN", "OUT", "CALL"} <= opcodes
    assert sum(1 for parsed in suite if "FORK" in parsed.opcodes() and "IN" in parsed.opcodes()) >= 4


def test_block_counts_follow_loop_bounds(program, model):
    bound = wcec(program("nested.eir"), None, model)

    assert bound.kind is BoundKind.UPPER
    assert bound.count("main", "outer") == 4
    assert bound.count("main", "inner") == 12
    assert bound.count("main", "_b2") == 1
    assert sum(bound.per_block.values()) == bound.value


def test_channels_exclude_idle_energy(program, model):
    bound = wcec(program("chan2.eir"), None, model)

    assert bound.idle_excluded
    assert bound.to_dict()["idle_excluded"] is True


def test_multi_cycle_instructions_count_every_cycle(model):
    parsed = parse_program(".func main\n    MUL r0, r0, r0\n    RET\n")

    bound = wcec(parsed, None, model)

    assert bound.value == (model.power("MUL") * model.o + model.p_b) * model.t_clk * 2 + (
        model.power("RET") * model.o + model.p_b
    ) * model.t_clk


def test_unreachable_code_costs_nothing(model):
    parsed = parse_program(".func main\n    RET\ndead:\n    MUL r0, r0, r0\n    JMP dead\n")

    assert wcec(parsed, None, model).count("main", "dead") == 0


def test_recursion_is_rejected(model):
    parsed = parse_program(RECURSIVE)

    assert ("down", "down") in call_graph(parsed).edges
    with pytest.raises(AnalysisError, match="recursion"):
        wcec(parsed, None, model)


def test_irreducible_control_flow_is_rejected(program, model):
    with pytest.raises(AnalysisError) as error:
        wcec(program("irreducible.eir"), None, model)

    assert error.value.diagnostics
    assert "irreducible" in str(error.value)


def test_static_profile_ranks_the_loop_first(program, model):
    profile = static_profile(program("loop10.eir"), None, model)

    name, entry = profile.hottest(1)[0]
    assert name == "main:loop"
    assert entry.share > 0.5
    assert sum(item.share for item in profile.blocks.values()) == pytest.approx(1.0)
    assert profile.to_dict()["functions"]["main"]["share"] == pytest.approx(1.0)
