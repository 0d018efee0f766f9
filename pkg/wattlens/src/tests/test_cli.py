from __future__ import annotations

import json
from io import StringIO

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from cli.runner import run_cli
from cli.services import UsageError, parse_bindings, parse_params, render_table
from energy.services import load_model
from hir.intervals import Interval


@pytest.fixture
def fixture(fixtures_dir):
    def path(name: str) -> str:
        return str(fixtures_dir / name)

    return path


def call(name, *args):
    out = StringIO()
    call_command(name, *args, stdout=out)
    return out.getvalue()


def call_json(name, *args):
    return json.loads(call(name, *args))


def test_sim_reports_return_value_and_energy(fixture):
    data = call_json("sim", fixture("fib.eir"), "--in", "r0=10", "--model", fixture("model.json"))

    assert data["return_value"] == 55
    assert data["outcome"] == "halted"
    assert data["energy"]["provenance"] == "simulated"
    assert data["energy"]["stats"]["n_idl"] == 0


def test_sim_compiles_hir_sources(fixture):
    data = call_json(
        "sim", fixture("triangle.hir"), "--in", "n=5", "--param", "n=0..6", "--model", fixture("model.json")
    )

    assert data["return_value"] == 10


def test_sim_statistics_mode_and_trace(fixture, tmp_path):
    quick = call_json("sim", fixture("staggered.eir"), "--stats-only", "--model", fixture("model.json"))
    trace = tmp_path / "trace.jsonl"
    full = call_json("sim", fixture("staggered.eir"), "--trace", str(trace), "--model", fixture("model.json"))

    assert quick["energy"]["provenance"] == "statistics-extrapolated"
    assert full["cycles"] == quick["cycles"]
    assert len(trace.read_text(encoding="utf-8").splitlines()) == full["cycles"]


def test_sim_out_of_fuel_fails(fixture):
    with pytest.raises(CommandError) as error:
        call("sim", fixture("spin.eir"), "--fuel", "50", "--model", fixture("model.json"))

    assert error.value.returncode == 1


def test_bounds_enclose_the_simulation(fixture):
    model = fixture("model.json")
    simulated = call_json("sim", fixture("fib.eir"), "--in", "r0=10", "--model", model)["energy"]["energy_pj"]

    upper = call_json("wcec", fixture("fib.eir"), "--model", model)
    lower = call_json("bcec", fixture("fib.eir"), "--model", model)

    assert upper["kind"] == "upper"
    assert lower["kind"] == "lower"
    assert lower["energy_pj"] <= simulated == upper["energy_pj"]


def test_wcec_output_is_byte_stable(fixture):
    args = ("wcec", fixture("nested.eir"), "--model", fixture("model.json"), "--profile")

    assert call(*args) == call(*args)


def test_wcec_of_irreducible_program_fails(fixture):
    with pytest.raises(CommandError, match="irreducible") as error:
        call("wcec", fixture("irreducible.eir"), "--model", fixture("model.json"))

    assert error.value.returncode == 1


def test_table_format(fixture):
    output = call("wcec", fixture("loop10.eir"), "--model", fixture("model.json"), "--format", "table")

    lines = output.splitlines()
    assert lines[0].startswith("loop10.eir: upper bound")
    assert lines[1].split() == ["block", "energy_pj"]
    assert lines[-1].startswith("total")


def test_static_profile_lists_the_hottest_blocks(fixture):
    data = call_json("static_profile", fixture("loop10.eir"), "--model", fixture("model.json"), "--top", "2")

    assert data["hottest"][0] == "main:loop"
    assert len(data["hottest"]) == 2


def test_hir_wcec_compares_with_the_instruction_level(fixture):
    data = call_json(
        "hir_wcec", fixture("folded.hir"), "--model", fixture("model.json"), "--param", "x=0..3", "--compare-isa"
    )

    assert data["upper"]["energy_pj"] >= data["lower"]["energy_pj"]
    assert data["comparison"]["deviation_pct"]["upper"] == 0
    assert data["statement_costs"]


def test_hir_wcec_needs_a_hir_program(fixture):
    with pytest.raises(CommandError) as error:
        call("hir_wcec", fixture("fib.eir"), "--model", fixture("model.json"))

    assert error.value.returncode == 2


def test_param_evaluates_the_entry_cost(fixture):
    data = call_json("param", fixture("triangle.hir"), "--model", fixture("model.json"), "--at", "n=3")

    assert data["entry"] == "main"
    assert "n^2" in data["functions"]["main"]["upper"]["formula"]
    assert data["evaluated"]["upper_pj"] == data["evaluated"]["lower_pj"]


def test_dist_over_listed_inputs(fixture, tmp_path):
    histogram = tmp_path / "histogram.csv"

    data = call_json(
        "dist",
        fixture("fib.eir"),
        "--model",
        fixture("model.json"),
        "--inputs",
        fixture("fib_inputs.json"),
        "--histogram",
        str(histogram),
        "--bins",
        "5",
    )

    assert data["method"] == "exact"
    assert data["runs"] == 4
    assert len(histogram.read_text(encoding="utf-8").splitlines()) == 6


def test_dist_renames_hir_parameters(fixture):
    data = call_json(
        "dist",
        fixture("countdown.hir"),
        "--model",
        fixture("model.json"),
        "--param",
        "x=0..15",
        "--inputs",
        fixture("countdown_inputs.json"),
        "--mc",
        "64",
        "--seed",
        "1",
    )

    assert data["method"] == "monte-carlo"
    assert data["runs"] == 64


def test_compare_levels_summarises_deviations(fixture):
    data = call_json(
        "compare_levels",
        fixture("straightline.hir"),
        fixture("folded.hir"),
        "--model",
        fixture("model.json"),
    )

    assert set(data["programs"]) == {"straightline.hir", "folded.hir"}
    assert data["summary"]["within_one_percent"] == 1.0


def test_compare_levels_rejects_eir(fixture):
    with pytest.raises(CommandError) as error:
        call("compare_levels", fixture("fib.eir"), "--model", fixture("model.json"))

    assert error.value.returncode == 2


def test_profile_writes_a_loadable_model(fixture, tmp_path):
    out = tmp_path / "fitted.json"
    heatmap = tmp_path / "heatmap.csv"

    data = call_json(
        "profile",
        "--device",
        fixture("device.json"),
        "--duration",
        "128",
        "--warmup",
        "16",
        "--out",
        str(out),
        "--heatmap",
        str(heatmap),
    )

    fitted = load_model(out)
    assert float(fitted.p_b) == pytest.approx(20.0, rel=1e-3)
    assert data["leave_one_out_error_mw"] > 0
    assert heatmap.read_text(encoding="utf-8").startswith("opcode,")


def test_report_combines_every_estimate(fixture):
    data = call_json(
        "report",
        fixture("fib.eir"),
        "--model",
        fixture("model.json"),
        "--in",
        "r0=10",
        "--inputs",
        fixture("fib_inputs.json"),
        "--budget",
        "1e9",
    )

    assert data["simulated"]["energy_pj"] == data["bounds"]["isa_upper"]["energy_pj"]
    assert data["extrapolated"]["energy_pj"] == data["simulated"]["energy_pj"]
    assert data["distribution"]["runs"] == 4
    assert data["budget"]["within_budget"] is True


def test_report_of_hir_program_has_cost_functions(fixture):
    data = call_json("report", fixture("sumrec.hir"), "--model", fixture("model.json"), "--param", "n=0..8")

    assert "sum" in data["cost_functions"]
    assert any("statement-level bounds unavailable" in note for note in data["notes"])


def test_report_over_budget_fails(fixture):
    with pytest.raises(CommandError, match="exceeds") as error:
        call("report", fixture("loop10.eir"), "--model", fixture("model.json"), "--budget", "1")

    assert error.value.returncode == 1


def test_report_without_bounds_cannot_check_a_budget(fixture):
    with pytest.raises(CommandError, match="no upper bound"):
        call("report", fixture("irreducible.eir"), "--model", fixture("model.json"), "--budget", "100")


def test_runner_exit_codes(fixture, capsys):
    assert run_cli([]) == 2
    assert "usage" in capsys.readouterr().err
    assert run_cli(["--version"]) == 0
    assert capsys.readouterr().out == "wattlens 0.1.0\n"
    assert run_cli(["transmogrify"]) == 2
    assert "unknown command" in capsys.readouterr().err
    assert run_cli(["static-profile", fixture("loop10.eir"), "--model", fixture("model.json")]) == 0
    assert json.loads(capsys.readouterr().out)["hottest"][0] == "main:loop"
    assert run_cli(["wcec", fixture("irreducible.eir"), "--model", fixture("model.json")]) == 1
    assert run_cli(["wcec", fixture("fib.eir")]) == 2


def test_parse_bindings_and_params():
    assert parse_bindings(["r0=5", "u=1,2,3", "mem[4]=0x10"]) == {"r0": 5, "u": [1, 2, 3], "mem[4]": 16}
    assert parse_params(["n=0..20", "m=3"]) == {"n": Interval(0, 20), "m": Interval(3, 3)}
    with pytest.raises(UsageError):
        parse_bindings(["r0"])
    with pytest.raises(UsageError):
        parse_params(["n=a..b"])


def test_render_table_aligns_numbers():
    table = render_table(("name", "value"), [("a", 1.5), ("long", 10)])

    assert table.splitlines() == ["name  value", "----  -----", "a     1.500", "long     10"]
