from __future__ import annotations

import os
import sys
from typing import Sequence

import django
from django.core.management import load_command_class

from cli.constants import ALIASES, COMMANDS, EXIT_OK, EXIT_USAGE, PROG, VERSION

USAGE = f"""usage: {PROG} <command> [options]

commands:
  sim             simulate a program and report its energy
  profile         fit an energy model on a synthetic device
  wcec            worst-case energy bound
  bcec            best-case energy bound
  static-profile  share of worst-case energy per block and function
  hir-wcec        statement-level bounds of a HIR program
  param           closed-form cost functions of a HIR program
  dist            energy distribution over an input distribution
  compare-levels  instruction-level against statement-level bounds
  report          transparency report combining all of the above

Run '{PROG} <command> --help' for the options of a command.
"""


def run_cli(argv: Sequence[str]) -> int:
    """Dispatch ``argv`` to a management command and return the exit status."""
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "src.settings")
    django.setup()

    argv = list(argv)
    if not argv:
        sys.stderr.write(USAGE)
        return EXIT_USAGE
    if argv[0] in ("-h", "--help", "help"):
        sys.stdout.write(USAGE)
        return EXIT_OK
    if argv[0] == "--version":
        sys.stdout.write(f"{PROG} {VERSION}\n")
        return EXIT_OK

    name = ALIASES.get(argv[0], argv[0])
    if name not in COMMANDS:
        sys.stderr.write(f"{PROG}: unknown command {argv[0]!r}\n\n{USAGE}")
        return EXIT_USAGE

    command = load_command_class("cli", name)
    try:
        command.run_from_argv([PROG, argv[0], *argv[1:]])
    except SystemExit as exit_:
        if exit_.code is None:
            return EXIT_OK
        return exit_.code if isinstance(exit_.code, int) else EXIT_USAGE
    return EXIT_OK
