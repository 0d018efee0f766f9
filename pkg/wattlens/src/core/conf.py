from __future__ import annotations

import os
from typing import TypeVar

from django.conf import settings

T = TypeVar("T")

SEED_ENV_VAR = "WATTLENS_SEED"


def setting(name: str, default: T) -> T:
    """Return a toolkit setting, falling back to ``default`` outside a configured project."""
    if not settings.configured:
        return default
    return getattr(settings, name, default)


def default_seed() -> int:
    override = os.environ.get(SEED_ENV_VAR)
    if override:
        return int(override)
    return int(setting("WATTLENS_SEED", 2017))
