from __future__ import annotations

from enum import Enum

DEFAULT_FUEL = 10_000_000
DEFAULT_CHANNEL_LATENCY = 3
MAX_CALL_DEPTH = 1024
MAIN_THREAD = 0


class Outcome(str, Enum):
    HALTED = "halted"
    DEADLOCK = "deadlock"
    FUEL_EXHAUSTED = "fuel-exhausted"


class ThreadStatus(str, Enum):
    RUNNING = "running"
    WAITING = "waiting"
    TRANSFER = "transfer"
    DONE = "done"
