from __future__ import annotations

from enum import Enum

KEYWORDS = frozenset({"array", "func", "var", "for", "in", "while", "if", "else", "return"})
ENTRY_FUNCTION = "main"
GLUE = "glue"


class Role(str, Enum):
    """Which part of a statement an instruction implements."""

    INIT = "init"
    TEST = "test"
    # Jump taken once when a test for equality leaves the statement's usual path.
    TEST_JUMP = "test_jump"
    STEP = "step"
    THEN_EXIT = "then_exit"
    BODY = "body"
    GLUE = "glue"


BINARY_OPCODES = {
    "+": "ADD",
    "-": "SUB",
    "*": "MUL",
    "&": "AND",
    "^": "XOR",
    "<<": "SHL",
}

RELATIONS = ("<", "<=", ">", ">=", "==", "!=")
