from __future__ import annotations

import numpy as np
import pytest

from machine.cfg import build_cfg, validate_for_analysis
from machine.domain import InputDomain, LoopBound
from machine.parsers import (
    EirOpcodeError,
    EirSyntaxError,
    OperandError,
    UndefinedFunctionError,
    UndefinedLabelError,
    parse_program,
)
from machine.printer import format_program


def test_parse_blocks_labels_and_bounds(program):
    nested = program("nested.eir")
    main = nested.function("main")

    assert [block.label for block in main.blocks] == ["_b0", "outer", "inner", "_b1", "_b2"]
    assert main.loop_bounds == {("inner", "inner"): LoopBound(2, 2), ("_b1", "outer"): LoopBound(3, 3)}
    assert nested.entry == "main"


def test_parse_domains_and_entry(program):
    fib = program("fib.eir")

    assert fib.domains == (InputDomain("r0", 0, 10),)
    assert fib.entry_function.params == ("r0",)
    assert [function.name for function in fib.functions] == ["main", "fib"]
    assert fib.function("fib").params == ("r0",)


def test_leading_label_opens_a_function():
    parsed = parse_program("f: LDC r0, 1\n    RET\n")

    assert [function.name for function in parsed.functions] == ["f"]
    assert parsed.entry == "f"
    assert parsed.entry_function.params == ()
    assert [block.label for block in parsed.function("f").blocks] == ["f"]
    assert [instruction.opcode for instruction in parsed.function("f").blocks[0].instructions] == ["LDC", "RET"]


def test_leading_label_only_applies_before_the_first_function():
    parsed = parse_program("f: LDC r0, 1\n    RET\n.func main\n    CALL r1, f\n    HALT\n")

    assert [function.name for function in parsed.functions] == ["f", "main"]
    assert parsed.entry == "main"


def test_instruction_before_any_label_or_function_is_rejected():
    with pytest.raises(EirSyntaxError, match="outside of a .func"):
        parse_program("    LDC r0, 1\n    RET\n")


def test_single_number_bound_means_at_most():
    parsed = parse_program(".func main\nloop:\n    LDC r0, 1\n    @bound 5\n    JMP loop\n")

    assert parsed.function("main").loop_bounds[("loop", "loop")] == LoopBound(0, 5)


@pytest.mark.parametrize(
    "source, error, line",
    [
        (".func main\n    FOO r0\n    RET\n", EirOpcodeError, 2),
        (".func main\n    ADD r0, r1\n    RET\n", OperandError, 2),
        (".func main\n    LDC r12, 1\n    RET\n", OperandError, 2),
        (".func main\n    JMP nowhere\n", UndefinedLabelError, 2),
        (".func main\n    CALL r0, helper\n    RET\n", UndefinedFunctionError, 2),
        (".func main\n    LDC r0, 1\n", EirSyntaxError, 2),
        (".func main\nempty:\nfull:\n    RET\n", EirSyntaxError, 3),
        (".func main\n    @bound 3\n    LDC r0, 1\n    RET\n", EirSyntaxError, 3),
        ("    RET\n", EirSyntaxError, 1),
    ],
)
def test_parse_errors_carry_the_line(source, error, line):
    with pytest.raises(error) as raised:
        parse_program(source)

    assert raised.value.line == line
    assert f"line {line}" in str(raised.value)


def test_operand_errors_carry_the_column():
    with pytest.raises(OperandError) as raised:
        parse_program(".func main\n    ADD r0, r1, q7\n    RET\n")

    assert raised.value.column == 17


def test_printed_program_parses_back(program):
    fib = program("fib.eir")

    assert parse_program(format_program(fib)) == fib


def test_cfg_finds_nested_loops(program):
    cfg = build_cfg(program("nested.eir"))["main"]

    inner = cfg.loop("inner")
    outer = cfg.loop("outer")
    assert inner.body == frozenset({"inner"})
    assert inner.parent == "outer"
    assert inner.depth == 2
    assert outer.body == frozenset({"outer", "inner", "_b1"})
    assert cfg.max_depth == 2
    assert cfg.dominates("outer", "_b2")
    assert cfg.reducible


def test_irreducible_program_gets_a_diagnostic(program):
    irreducible = program("irreducible.eir")
    cfg = build_cfg(irreducible)

    diagnostics = validate_for_analysis(irreducible, cfg)

    assert not cfg.reducible
    assert len(diagnostics) == 1
    assert "irreducible" in diagnostics[0].message
    assert diagnostics[0].line is not None


def test_missing_bound_is_reported_with_a_hint():
    parsed = parse_program(".func main\nloop:\n    LDC r0, 1\n    BRT r0, loop\n    RET\n")

    diagnostics = validate_for_analysis(parsed, build_cfg(parsed))

    assert [str(diagnostic) for diagnostic in diagnostics] == [
        "main:loop (line 4): missing @bound on back edge loop -> loop"
    ]


def test_unreachable_blocks_are_ignored():
    parsed = parse_program(".func main\n    RET\ndead:\n    LDC r0, 1\n    JMP dead\n")

    cfg = build_cfg(parsed)

    assert "dead" not in cfg["main"].reachable
    assert validate_for_analysis(parsed, cfg) == []


def random_function(seed: int) -> str:
    rng = np.random.default_rng(seed)
    size = int(rng.integers(3, 11))
    lines = [".func main", "    LDC r1, 0"]
    for index in range(size):
        lines += [f"b{index}:", "    LDC r0, 1"]
        target = f"b{int(rng.integers(0, size))}"
        kind = int(rng.integers(0, 3)) if index < size - 1 else int(rng.integers(1, 3))
        lines.append((f"    BRT r0, {target}", f"    JMP {target}", "    RET")[kind])
    return "\n".join(lines) + "\n"


def reached(successors, entry, removed=None):
    seen, stack = set(), [entry]
    while stack:
        label = stack.pop()
        if label in seen or label == removed:
            continue
        seen.add(label)
        stack.extend(successors[label])
    return seen


@pytest.mark.parametrize("seed", range(60))
def test_dominators_match_removal_reachability(seed):
    # d dominates n exactly when n cannot be reached from the entry without d.
    function_cfg = build_cfg(parse_program(random_function(seed)))["main"]
    successors, entry = function_cfg.successors, function_cfg.entry
    reachable = reached(successors, entry)

    assert function_cfg.reachable == reachable
    for node in reachable:
        expected = {d for d in reachable if d == node or node not in reached(successors, entry, removed=d)}
        assert function_cfg.dominators(node) == expected, node
