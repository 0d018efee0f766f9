from __future__ import annotations

import pytest

from hir.checker import check_program
from hir.compiler import bind_inputs, compile_program
from hir.parsers import parse_hir
from hir.services import lift_model
from parametric.domain import BindingError, DomainError, UnsupportedRelationError
from parametric.services import eval_cost, extract_relations, solve
from simulator.engine import run
from simulator.services import trace_energy
from staticanalysis.domain import BoundKind

SIZES = (0, 1, 2, 3, 7, 12, 20)

MUTUAL = """\
func even(n) {
    if (n <= 0) {
        return 1;
    }
    return odd(n - 1);
}

func odd(n) {
    if (n <= 0) {
        return 0;
    }
    return even(n - 1);
}

func main(n) {
    return even(n);
}
"""

TWO_SELF_CALLS = """\
func fib(n) {
    if (n <= 1) {
        return n;
    }
    return fib(n - 1) + fib(n - 2);
}

func main(n) {
    return fib(n);
}
"""


def cost_functions(program, model):
    compiled, mapping = compile_program(program, {"n": (0, 20)})
    costs = lift_model(model, compiled, mapping)
    return compiled, solve(extract_relations(program, costs))


@pytest.mark.parametrize("name, degree", [("matmul.hir", 3), ("triangle.hir", 2), ("sumrec.hir", 1)])
def test_cost_functions_match_simulation(hir_program, model, name, degree):
    program = hir_program(name)
    compiled, functions = cost_functions(program, model)
    main = functions["main"]

    assert main.degree() == degree
    for n in SIZES:
        simulated = trace_energy(model, run(compiled, {"r0": n})).value
        assert eval_cost(main, {"n": n}) == simulated
        assert eval_cost(main, {"n": n}, BoundKind.LOWER) == simulated


def test_recursive_function_keeps_its_base_case(hir_program, model):
    _, functions = cost_functions(hir_program("sumrec.hir"), model)

    data = functions["sum"].to_dict()

    assert data["base_case"] == {"param": "n", "at_most": 0}
    assert data["params"] == ["n"]
    assert data["upper"]["formula"]


def test_formula_lists_the_leading_term_first(hir_program, model):
    _, functions = cost_functions(hir_program("triangle.hir"), model)

    formula = functions["main"].format()

    assert formula.startswith(f"{functions['main'].terms()[0][1]}*n^2")
    assert functions["main"].coefficients()[0]["monomial"] == {"n": 2}


def test_callee_costs_feed_their_callers(hir_program, model):
    _, functions = cost_functions(hir_program("helper.hir"), model)

    assert set(functions) == {"main", "work"}
    assert eval_cost(functions["main"], {"n": 5}) > eval_cost(functions["main"], {"n": 4})
    assert eval_cost(functions["main"], {"n": 0}) > eval_cost(functions["work"], {"k": 2})


@pytest.mark.parametrize("bindings", [{}, {"n": -1}, {"n": 1.5}])
def test_bad_bindings(hir_program, model, bindings):
    _, functions = cost_functions(hir_program("triangle.hir"), model)

    with pytest.raises(BindingError):
        eval_cost(functions["main"], bindings)


@pytest.mark.parametrize("source, message", [(MUTUAL, "mutual recursion"), (TWO_SELF_CALLS, "self-calls")])
def test_unsupported_recursion(model, source, message):
    program = check_program(parse_hir(source))
    compiled, mapping = compile_program(program, {"n": (0, 5)})

    with pytest.raises(UnsupportedRelationError, match=message):
        extract_relations(program, lift_model(model, compiled, mapping))


EMPTY_RANGE = """\
func main(n) {
    var s = 0;
    for i in n..3 {
        s = s + 1;
    }
    return s;
}
"""

EMPTY_RANGE_IN_CALLEE = """\
func tail(k) {
    var s = 0;
    for i in k..3 {
        s = s + i;
    }
    return s;
}

func main(n) {
    return tail(n) + 1;
}
"""

SHRINKING_INNER_RANGE = """\
func main(n) {
    var s = 0;
    for i in 0..n {
        for j in i..4 {
            s = s + j;
        }
    }
    return s;
}
"""


def solved_source(source, model, params):
    program = check_program(parse_hir(source))
    compiled, mapping = compile_program(program, params)
    functions = solve(extract_relations(program, lift_model(model, compiled, mapping)))
    return program, compiled, functions["main"]


@pytest.mark.parametrize(
    "source, valid_up_to",
    [(EMPTY_RANGE, 3), (EMPTY_RANGE_IN_CALLEE, 3), (SHRINKING_INNER_RANGE, 5)],
)
def test_cost_function_rejects_parameters_where_a_range_would_be_negative(model, source, valid_up_to):
    program, compiled, main = solved_source(source, model, {"n": (0, 8)})

    for n in range(9):
        simulated = trace_energy(model, run(compiled, bind_inputs(program, {"n": n}))).value
        if n <= valid_up_to:
            assert eval_cost(main, {"n": n}) == simulated
            assert eval_cost(main, {"n": n}, BoundKind.LOWER) == simulated
        else:
            with pytest.raises(DomainError):
                eval_cost(main, {"n": n})


def test_domain_assumption_is_reported(model):
    _, _, main = solved_source(EMPTY_RANGE, model, {"n": (0, 8)})

    assert main.to_dict()["assumes"] == ["3 - n >= 0"]
    with pytest.raises(DomainError, match="3 - n >= 0"):
        eval_cost(main, {"n": 5})


def test_constant_empty_range_costs_one_test(model):
    source = "func main(n) {\n    var s = n;\n    for i in 5..2 {\n        s = s + i;\n    }\n    return s;\n}\n"
    program, compiled, main = solved_source(source, model, {"n": (0, 4)})

    assert "assumes" not in main.to_dict()
    for n in range(5):
        assert eval_cost(main, {"n": n}) == trace_energy(model, run(compiled, bind_inputs(program, {"n": n}))).value


def test_reassigned_parameter_cannot_bound_a_loop(model):
    source = "func main(n) {\n    n = n - 2;\n    for i in 0..n {\n        n = n;\n    }\n    return n;\n}\n"
    program = check_program(parse_hir(source))
    compiled, mapping = compile_program(program, {"n": (2, 6)})

    with pytest.raises(UnsupportedRelationError, match="not affine"):
        extract_relations(program, lift_model(model, compiled, mapping))


@pytest.mark.parametrize("name", ["parity.hir", "clamp.hir"])
def test_branches_open_a_gap_that_encloses_every_run(hir_program, model, name):
    program = hir_program(name)
    compiled, mapping = compile_program(program, {"x": (0, 15)})
    main = solve(extract_relations(program, lift_model(model, compiled, mapping)))["main"]

    upper = eval_cost(main, {"x": 0})
    lower = eval_cost(main, {"x": 0}, BoundKind.LOWER)
    energies = [trace_energy(model, run(compiled, bind_inputs(program, {"x": x}))).value for x in range(16)]

    assert lower < upper
    assert lower <= min(energies)
    assert max(energies) <= upper


def test_triangular_cost_matches_a_brute_force_sum(hir_program, model):
    program = hir_program("triangle.hir")
    compiled, functions = cost_functions(program, model)
    costs = [eval_cost(functions["main"], {"n": n}) for n in range(51)]

    # Each outer trip costs a*i + b, so the second differences are all a.
    steps = [after - before for before, after in zip(costs, costs[1:])]
    growth = {after - before for before, after in zip(steps, steps[1:])}
    assert len(growth) == 1
    for n in range(51):
        assert costs[n] == trace_energy(model, run(compiled, {"r0": n})).value
