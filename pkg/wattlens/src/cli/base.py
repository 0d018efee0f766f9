from __future__ import annotations

import json
import logging
from typing import Any, Sequence

from django.core.management.base import BaseCommand, CommandError

from cli.constants import EXIT_ANALYSIS, EXIT_USAGE, OutputFormat
from cli.services import UsageError, load_source, parse_bindings, parse_params, render_table
from core.errors import WattlensError
from energy.domain import EnergyModel
from energy.services import load_model

logger = logging.getLogger(__name__)


class Output:
    """What a command prints: JSON data, and rows for the table format."""

    def __init__(self, data: Any, headers: Sequence[str] = (), rows: Sequence[Sequence[Any]] = (), text: str = ""):
        self.data = data
        self.headers = tuple(headers)
        self.rows = [tuple(row) for row in rows]
        self.text = text


class WattlensCommand(BaseCommand):
    """Shared options, error mapping and output formats of every subcommand."""

    requires_system_checks: list[str] = []
    exit_code = 0

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        parser.add_argument(
            "--format",
            choices=[choice.value for choice in OutputFormat],
            default=OutputFormat.JSON.value,
            help="Print JSON (default) or an aligned table.",
        )
        return parser

    def add_model_argument(self, parser, required: bool = True) -> None:
        parser.add_argument("--model", required=required, help="Energy model JSON file.")

    def add_param_argument(self, parser) -> None:
        parser.add_argument(
            "--param",
            action="append",
            default=[],
            metavar="NAME=N|NAME=LO..HI",
            help="Range of a HIR entry parameter; repeatable.",
        )

    def model(self, options: dict[str, Any]) -> EnergyModel:
        return load_model(options["model"])

    def source(self, options: dict[str, Any], path: str | None = None):
        return load_source(path or options["program"], self.params(options))

    def params(self, options: dict[str, Any]):
        return parse_params(options.get("param") or [])

    def bindings(self, options: dict[str, Any]):
        return parse_bindings(options.get("bindings") or [])

    def run(self, **options) -> Output:
        raise NotImplementedError

    def handle(self, *args, **options):
        self.exit_code = 0
        try:
            output = self.run(**options)
        except UsageError as error:
            raise CommandError(str(error), returncode=EXIT_USAGE) from error
        except WattlensError as error:
            logger.info("%s failed: %s", self.__class__.__module__, error)
            raise CommandError(str(error), returncode=EXIT_ANALYSIS) from error
        except OSError as error:
            raise CommandError(f"{error.filename or ''}: {error.strerror or error}", returncode=EXIT_ANALYSIS) from error

        if options["format"] == OutputFormat.TABLE.value and output.headers:
            self.stdout.write(output.text + render_table(output.headers, output.rows), ending="")
        else:
            self.stdout.write(json.dumps(output.data, indent=2, sort_keys=True))
        if self.exit_code:
            raise CommandError(self.failure_message(output), returncode=self.exit_code)

    def failure_message(self, output: Output) -> str:
        return "analysis failed"
