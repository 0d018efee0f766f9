from __future__ import annotations

import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from core.numbers import exact, to_json_number
from energy.constants import InstructionClass, PowerSource
from energy.domain import (
    EnergyModel,
    ExecutionStats,
    InstructionPower,
    InstructionSpec,
    ModelParseError,
    ModelValidationError,
    ThreadCountError,
    UnknownOpcodeError,
)

logger = logging.getLogger(__name__)

INSTRUCTION_KEYS = (
    "opcode",
    "power_mw",
    "source",
    "operand_count",
    "encoding_bits",
    "mem_access",
    "issue_cycles",
    "class",
)


def _number(data: Mapping[str, Any], key: str) -> Fraction:
    if key not in data:
        raise ModelValidationError(key, "missing")
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelValidationError(key, f"expected a number, got {value!r}")
    return exact(value)


def _parse_m_t(raw: Any) -> dict[int, Fraction]:
    if isinstance(raw, list):
        entries = {index: value for index, value in enumerate(raw, start=1)}
    elif isinstance(raw, dict):
        try:
            entries = {int(key): value for key, value in raw.items()}
        except ValueError as error:
            raise ModelValidationError("m_t", f"non-integer thread index: {error}") from error
    else:
        raise ModelValidationError("m_t", "expected an array indexed from t=1")
    table: dict[int, Fraction] = {}
    for t, value in entries.items():
        if value is None:
            continue
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelValidationError("m_t", f"m_t[{t}] is not a number")
        table[t] = exact(value)
    return table


def _parse_instruction(index: int, raw: Any) -> tuple[InstructionSpec, InstructionPower]:
    if not isinstance(raw, dict):
        raise ModelValidationError(f"instructions[{index}]", "expected an object")
    missing = [key for key in INSTRUCTION_KEYS if key not in raw]
    if missing:
        raise ModelValidationError(f"instructions[{index}].{missing[0]}", "missing")
    opcode = str(raw["opcode"]).upper()
    prefix = f"instructions[{opcode}]"
    try:
        klass = InstructionClass(raw["class"])
    except ValueError:
        raise ModelValidationError(f"{prefix}.class", f"unknown class {raw['class']!r}") from None
    try:
        source = PowerSource(raw["source"])
    except ValueError:
        raise ModelValidationError(f"{prefix}.source", f"unknown source {raw['source']!r}") from None
    for key in ("operand_count", "encoding_bits", "issue_cycles"):
        if isinstance(raw[key], bool) or not isinstance(raw[key], int):
            raise ModelValidationError(f"{prefix}.{key}", "expected an integer")
    if not isinstance(raw["mem_access"], bool):
        raise ModelValidationError(f"{prefix}.mem_access", "expected a boolean")
    spec = InstructionSpec(
        opcode=opcode,
        operand_count=raw["operand_count"],
        encoding_bits=raw["encoding_bits"],
        mem_access=raw["mem_access"],
        issue_cycles=raw["issue_cycles"],
        klass=klass,
    )
    power = InstructionPower(_number(raw, "power_mw"), source)
    return spec, power


def model_from_dict(data: Mapping[str, Any]) -> EnergyModel:
    if not isinstance(data, dict):
        raise ModelParseError("model file must contain a JSON object")
    t_max = data.get("t_max")
    if isinstance(t_max, bool) or not isinstance(t_max, int):
        raise ModelValidationError("t_max", "expected an integer")
    raw_instructions = data.get("instructions")
    if not isinstance(raw_instructions, list):
        raise ModelValidationError("instructions", "expected an array")

    isa_meta: dict[str, InstructionSpec] = {}
    powers: dict[str, InstructionPower] = {}
    for index, raw in enumerate(raw_instructions):
        spec, power = _parse_instruction(index, raw)
        if spec.opcode in isa_meta:
            raise ModelValidationError(f"instructions[{spec.opcode}]", "duplicate opcode")
        isa_meta[spec.opcode] = spec
        powers[spec.opcode] = power

    return EnergyModel(
        t_clk=_number(data, "t_clk_ns"),
        p_b=_number(data, "p_b_mw"),
        o=_number(data, "overhead"),
        powers=powers,
        m_t=_parse_m_t(data.get("m_t")),
        t_max=t_max,
        isa_meta=isa_meta,
    )


def model_to_dict(model: EnergyModel) -> dict[str, Any]:
    return {
        "t_clk_ns": to_json_number(model.t_clk),
        "p_b_mw": to_json_number(model.p_b),
        "overhead": to_json_number(model.o),
        "t_max": model.t_max,
        "m_t": [to_json_number(model.m_t[t]) for t in range(1, model.t_max + 1)],
        "instructions": [
            {
                "opcode": opcode,
                "power_mw": to_json_number(entry.power),
                "source": entry.source.value,
                "operand_count": model.isa_meta[opcode].operand_count,
                "encoding_bits": model.isa_meta[opcode].encoding_bits,
                "mem_access": model.isa_meta[opcode].mem_access,
                "issue_cycles": model.isa_meta[opcode].issue_cycles,
                "class": model.isa_meta[opcode].klass.value,
            }
            for opcode, entry in model.powers.items()
        ],
    }


def dump_model(model: EnergyModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def load_model(path: Path | str) -> EnergyModel:
    source = Path(path)
    try:
        data = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as error:
        raise ModelParseError(
            f"{source}: malformed JSON at line {error.lineno}, column {error.colno}: {error.msg}"
        ) from error
    model = model_from_dict(data)
    logger.info("Loaded energy model %s with %s instructions", source, len(model.powers))
    return model


def save_model(model: EnergyModel, path: Path | str) -> None:
    Path(path).write_text(dump_model(model), encoding="utf-8")


def instruction_energy(model: EnergyModel, opcode: str, t: int) -> Fraction:
    """Energy of one issue cycle of ``opcode`` at ``t`` active threads, in pJ."""
    if not 1 <= t <= model.t_max:
        raise ThreadCountError(f"thread count {t} outside 1..{model.t_max}")
    power = model.power(opcode)
    return (model.m_t[t] * power * model.o + model.p_b) * model.t_clk


def idle_energy(model: EnergyModel, n_idl: int = 1) -> Fraction:
    return model.p_b * n_idl * model.t_clk


def energy(model: EnergyModel, stats: ExecutionStats) -> Fraction:
    """Evaluate the energy model on execution statistics, exactly, in pJ."""
    total = idle_energy(model, stats.n_idl)
    for (opcode, t), count in stats.n_it.items():
        if opcode not in model.powers:
            raise UnknownOpcodeError(opcode)
        total += instruction_energy(model, opcode, t) * count
    return total
