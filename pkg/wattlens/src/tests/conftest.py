from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from energy.services import load_model
from hir.checker import check_program
from hir.parsers import parse_hir_file
from machine.domain import Program
from machine.parsers import parse_file

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"

SINGLE_THREADED = (
    "absdiff.eir",
    "callsum.eir",
    "fib.eir",
    "ifelse.eir",
    "loop10.eir",
    "maxof.eir",
    "memsum.eir",
    "nested.eir",
    "popcount.eir",
    "search.eir",
    "straight.eir",
)
SINGLE_PATH = ("loop10.eir", "nested.eir", "straight.eir")
# Forking fixtures with the most threads they run at once.
MULTI_THREADED = {
    "chan2.eir": 2,
    "fanin.eir": 3,
    "fanout.eir": 4,
    "forkcall.eir": 3,
    "fourway.eir": 4,
    "gridfork.eir": 3,
    "lockstep.eir": 2,
    "pairloop.eir": 2,
    "pingpong.eir": 2,
    "pipeline.eir": 3,
    "staggered.eir": 2,
}

# HIR fixtures with the parameter ranges they are analysed under.
HIR_SUITE = {
    "clamp.hir": {"x": (0, 15)},
    "countdown.hir": {"x": (0, 15)},
    "dot.hir": {"n": (0, 8)},
    "fill.hir": {"n": (0, 8)},
    "folded.hir": {"x": (0, 3)},
    "helper.hir": {"n": (0, 6)},
    "matmul.hir": {"n": (0, 4)},
    "parity.hir": {"x": (0, 15)},
    "straightline.hir": {"a": (0, 3), "b": (0, 3)},
    "triangle.hir": {"n": (0, 6)},
}


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def model():
    return load_model(FIXTURES / "model.json")


@pytest.fixture
def program():
    def load(name: str) -> Program:
        return parse_file(FIXTURES / name)

    return load


@pytest.fixture
def hir_program():
    def load(name: str):
        return check_program(parse_hir_file(FIXTURES / name))

    return load


def domain_inputs(program: Program) -> list[dict[str, int]]:
    """Every input binding of a program's declared domains."""
    names = [domain.name for domain in program.domains]
    spans = [range(domain.lo, domain.hi + 1) for domain in program.domains]
    return [dict(zip(names, values)) for values in itertools.product(*spans)]


def param_inputs(ranges: dict[str, tuple[int, int]]) -> list[dict[str, int]]:
    names = sorted(ranges)
    spans = [range(ranges[name][0], ranges[name][1] + 1) for name in names]
    return [dict(zip(names, values)) for values in itertools.product(*spans)]
