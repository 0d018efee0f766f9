from __future__ import annotations

from enum import Enum

REFERENCE_OPCODE = "ADD"
KERNEL_WORKER = "worker"
SETUP_REGISTERS = ("r1", "r2")
IMMEDIATE_LIMIT = 1 << 16
ADDRESS_SPAN = 512


class EstimationStrategy(str, Enum):
    FEATURE = "feature"
    AVERAGE = "average"
    OPERAND_COUNT = "operand-count"
