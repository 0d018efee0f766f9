from __future__ import annotations

import pytest

from hir.checker import HirTypeError, check_program
from hir.compiler import CompileError, bind_inputs, compile_program, compile_text
from hir.interpreter import interpret
from hir.intervals import Interval
from hir.parsers import HirSyntaxError, parse_hir
from hir.services import HirAnalysisError, compare_levels, hir_bcec, hir_wcec, lift_model
from simulator.engine import run
from simulator.services import trace_energy
from staticanalysis.services import wcec

from .conftest import HIR_SUITE, param_inputs


def checked(text):
    return check_program(parse_hir(text))


@pytest.mark.parametrize(
    "name, inputs, expected",
    [
        ("triangle.hir", {"n": 5}, 10),
        ("countdown.hir", {"x": 7}, 3),
        ("clamp.hir", {"x": 2}, 4),
        ("clamp.hir", {"x": 13}, 22),
        ("clamp.hir", {"x": 6}, 12),
        ("parity.hir", {"x": 7}, 1),
        ("fill.hir", {"n": 4}, 9),
        ("helper.hir", {"n": 4}, 7),
        ("dot.hir", {"n": 3, "u": [1, 2, 3], "v": [4, 5, 6]}, 32),
        ("sumrec.hir", {"n": 5}, 15),
    ],
)
def test_interpreter(hir_program, name, inputs, expected):
    assert interpret(hir_program(name), inputs).value == expected


def test_interpreter_exposes_arrays(hir_program):
    program = hir_program("fill.hir")

    result = interpret(program, {"n": 4})

    assert result.array(program, "buf")[:5] == [0, 1, 4, 9, 0]


@pytest.mark.parametrize("name", sorted(HIR_SUITE))
def test_compiled_code_agrees_with_the_interpreter(hir_program, name):
    program = hir_program(name)
    compiled, _ = compile_program(program, HIR_SUITE[name])

    for inputs in param_inputs(HIR_SUITE[name]):
        trace = run(compiled, bind_inputs(program, inputs))
        assert trace.return_value == interpret(program, inputs).value


def test_compiled_arrays_agree_with_the_interpreter(hir_program):
    program = hir_program("dot.hir")
    compiled, _ = compile_program(program, {"n": 3})
    inputs = {"n": 3, "u": [1, 2, 3], "v": [4, 5, 6]}

    assert run(compiled, bind_inputs(program, inputs)).return_value == 32


def test_loop_bounds_follow_parameter_ranges(hir_program):
    compiled, _ = compile_program(hir_program("triangle.hir"), {"n": (0, 6)})

    bounds = [bound for function in compiled.functions for bound in function.loop_bounds.values()]
    assert sorted((bound.lo, bound.hi) for bound in bounds) == [(0, 5), (0, 6)]
    assert compiled.domains[0].name == "r0"


def test_mapping_covers_every_instruction(hir_program):
    compiled, mapping = compile_program(hir_program("triangle.hir"), {"n": (0, 6)})

    instructions = sum(1 for function in compiled.functions for _ in function.instructions())
    assert len(mapping.to_dict()) == instructions
    assert all(statement.startswith("main:") for statement in mapping.statements())


def test_folded_branch_is_still_emitted(hir_program):
    compiled, _ = compile_program(hir_program("folded.hir"), {"x": (0, 3)})

    assert "MUL" in compiled.opcodes()


@pytest.mark.parametrize("name", sorted(HIR_SUITE))
def test_statement_bounds_enclose_every_run(hir_program, model, name):
    program = hir_program(name)
    params = HIR_SUITE[name]
    compiled, mapping = compile_program(program, params)
    costs = lift_model(model, compiled, mapping)
    upper = hir_wcec(program, costs, params)
    lower = hir_bcec(program, costs, params)

    for inputs in param_inputs(params):
        value = trace_energy(model, run(compiled, bind_inputs(program, inputs))).value
        assert lower.value <= value <= upper.value


def test_lifted_costs_add_up_to_the_instructions(hir_program, model):
    program = hir_program("straightline.hir")
    compiled, mapping = compile_program(program)

    costs = lift_model(model, compiled, mapping)

    assert sum(costs.total(sid) for sid in costs.statements) == wcec(compiled, None, model).value
    assert set(costs.to_dict()) == set(mapping.statements())


def test_glue_free_code_has_no_deviation(hir_program, model):
    comparison = compare_levels(hir_program("straightline.hir"), model, HIR_SUITE["straightline.hir"])

    assert comparison.upper_deviation == 0
    assert comparison.lower_deviation == 0
    assert comparison.to_dict()["deviation_pct"] == {"upper": 0.0, "lower": 0.0}


def test_folded_branch_costs_only_the_side_that_runs(hir_program, model):
    comparison = compare_levels(hir_program("folded.hir"), model, HIR_SUITE["folded.hir"])

    assert comparison.hir_upper == comparison.isa_upper
    assert "main:2" in comparison.per_statement
    assert "main:3" not in comparison.per_statement


def test_helper_loops_share_one_bound_over_all_call_sites(hir_program, model):
    program = hir_program("helper.hir")

    comparison = compare_levels(program, model, HIR_SUITE["helper.hir"])

    assert comparison.hir_upper == comparison.isa_upper
    assert compile_text(program, HIR_SUITE["helper.hir"])[0].count("@bound 0..6") == 1


def test_statement_bounds_track_instruction_bounds_over_the_suite(hir_program, model):
    deviations = {
        name: compare_levels(hir_program(name), model, params).upper_deviation for name, params in HIR_SUITE.items()
    }

    within = [name for name, deviation in deviations.items() if abs(deviation) <= 1]
    assert len(within) >= 0.9 * len(deviations), deviations
    for name in ("straightline.hir", "folded.hir", "helper.hir"):
        assert deviations[name] == 0


def test_recursion_cannot_be_bounded(hir_program, model):
    program = hir_program("sumrec.hir")
    compiled, mapping = compile_program(program, {"n": (0, 5)})

    assert run(compiled, {"r0": 5}).return_value == 15
    with pytest.raises(HirAnalysisError, match="recursion"):
        hir_wcec(program, lift_model(model, compiled, mapping), {"n": (0, 5)})


@pytest.mark.parametrize(
    "source, line",
    [
        ("func main( {\n}\n", 1),
        ("func main() {\n    var x = 1\n    return x;\n}\n", 3),
        ("func main() {\n    return 1 $ 2;\n}\n", 2),
        ("", 1),
    ],
)
def test_syntax_errors_carry_the_line(source, line):
    with pytest.raises(HirSyntaxError) as error:
        parse_hir(source)

    assert error.value.line == line


@pytest.mark.parametrize(
    "source, message",
    [
        ("func main(x) {\n    var x = 1;\n    return x;\n}\n", "already declared"),
        ("func main() {\n    for i in 0..3 {\n        i = 1;\n    }\n    return 0;\n}\n", "loop variable"),
        ("func main() {\n    return y;\n}\n", "undeclared"),
        ("array a[4];\nfunc main() {\n    return a;\n}\n", "used as a scalar"),
        ("func main() {\n    return f(1);\n}\n", "undefined function"),
        ("func f(a, b) {\n    return a;\n}\nfunc main() {\n    return f(1);\n}\n", "argument"),
    ],
)
def test_checker_errors(source, message):
    with pytest.raises(HirTypeError, match=message):
        checked(source)


def test_parameters_are_assignable():
    program = checked("func main(x) {\n    x = x + 1;\n    return x;\n}\n")

    assert interpret(program, {"x": 1}).value == 2


def test_register_pressure_is_a_compile_error():
    declarations = "".join(f"    var v{index} = {index};\n" for index in range(13))
    program = checked(f"func main() {{\n{declarations}    return v0;\n}}\n")

    with pytest.raises(CompileError, match="registers"):
        compile_program(program)


def test_unknown_inputs_are_rejected(hir_program):
    with pytest.raises(CompileError):
        bind_inputs(hir_program("triangle.hir"), {"m": 1})


def test_interval_arithmetic():
    assert Interval(1, 3) * Interval(-2, 2) == Interval(-6, 6)
    assert Interval(1, 3) - Interval(0, 1) == Interval(0, 3)
    assert Interval.point(4).union(Interval(0, 1)) == Interval(0, 4)


def test_reassigned_parameter_leaves_the_loop_unbounded(model):
    program = checked("func main(n) {\n    n = n + 10;\n    for i in 0..n {\n        n = n;\n    }\n    return n;\n}\n")
    compiled, mapping = compile_program(program, {"n": (0, 3)})

    assert run(compiled, bind_inputs(program, {"n": 3})).return_value == 13
    with pytest.raises(HirAnalysisError, match="trip count"):
        hir_wcec(program, lift_model(model, compiled, mapping), {"n": (0, 3)})
