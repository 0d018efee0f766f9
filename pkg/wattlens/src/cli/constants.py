from __future__ import annotations

from enum import Enum

VERSION = "0.1.0"
PROG = "wattlens"

COMMANDS = (
    "sim",
    "profile",
    "wcec",
    "bcec",
    "static_profile",
    "hir_wcec",
    "param",
    "dist",
    "compare_levels",
    "report",
)

ALIASES = {
    "static-profile": "static_profile",
    "hir-wcec": "hir_wcec",
    "compare-levels": "compare_levels",
}

HIR_SUFFIX = ".hir"

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_USAGE = 2


class OutputFormat(str, Enum):
    JSON = "json"
    TABLE = "table"
