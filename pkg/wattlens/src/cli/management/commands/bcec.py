from __future__ import annotations

from cli.management.commands.wcec import Command as BoundCommand
from staticanalysis.domain import BoundKind


class Command(BoundCommand):
    help = "Best-case energy bound of a program over its input domain."
    kind = BoundKind.LOWER
