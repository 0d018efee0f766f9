from __future__ import annotations

import dataclasses

from cli.base import Output, WattlensCommand
from device.constants import OperandRegime
from device.services import default_device, load_device
from energy.constants import PowerSource
from energy.services import model_to_dict, save_model
from profiler.constants import EstimationStrategy
from profiler.kernels import ProfilingError
from profiler.services import (
    FitConfig,
    export_heatmap_csv,
    fit_model,
    leave_one_out_error,
    pairwise_heatmap,
)


class Command(WattlensCommand):
    help = "Fit an energy model from kernel measurements on a synthetic device."

    def add_arguments(self, parser):
        parser.add_argument("--device", help="Device ground-truth JSON; the reference device if omitted.")
        parser.add_argument("--out", help="Write the fitted model to this file.")
        parser.add_argument("--heatmap", help="Write the pairwise power heat map as CSV.")
        parser.add_argument("--duration", type=int, help="Measured cycles per kernel.")
        parser.add_argument("--warmup", type=int, help="Discarded cycles before each measurement.")
        parser.add_argument(
            "--strategy",
            choices=[strategy.value for strategy in EstimationStrategy],
            default=EstimationStrategy.FEATURE.value,
            help="How powers of unprofileable instructions are estimated.",
        )
        parser.add_argument(
            "--operands",
            choices=[regime.value for regime in OperandRegime],
            default=OperandRegime.RANDOM.value,
        )
        parser.add_argument("--seed", type=int, help="Overrides the device's measurement seed.")

    def run(self, **options) -> Output:
        device = load_device(options["device"]) if options["device"] else default_device()
        if options["seed"] is not None:
            device = dataclasses.replace(device, seed=options["seed"])

        overrides = {
            "operands": OperandRegime(options["operands"]),
            "strategy": EstimationStrategy(options["strategy"]),
        }
        if options["duration"] is not None:
            overrides["duration_cycles"] = options["duration"]
        if options["warmup"] is not None:
            overrides["warmup_cycles"] = options["warmup"]
        config = FitConfig(**overrides)

        model = fit_model(device, device.isa_meta, config)
        if options["out"]:
            save_model(model, options["out"])
        profiled = [op for op, entry in model.powers.items() if entry.source is PowerSource.PROFILED]
        if options["heatmap"]:
            heatmap = pairwise_heatmap(device, profiled, config=config, isa_meta=device.isa_meta)
            export_heatmap_csv(heatmap, options["heatmap"])

        data = {"model": model_to_dict(model)}
        try:
            data["leave_one_out_error_mw"] = leave_one_out_error(model, config.strategy)
        except ProfilingError:
            data["leave_one_out_error_mw"] = None
        rows = [(op, float(entry.power), entry.source.value) for op, entry in model.powers.items()]
        return Output(data, ("opcode", "power_mw", "source"), rows)
