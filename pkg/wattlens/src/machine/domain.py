from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterator, Mapping

from machine.constants import TERMINATOR_OF, Terminator

BackEdge = tuple[str, str]


@dataclass(frozen=True)
class LoopBound:
    """Traversals of one back edge per loop entry: at least ``lo``, at most ``hi``."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi < self.lo:
            raise ValueError(f"invalid loop bound {self.lo}..{self.hi}")

    @classmethod
    def at_most(cls, hi: int) -> "LoopBound":
        return cls(0, hi)

    def __str__(self) -> str:
        if self.lo == 0:
            return str(self.hi)
        return f"{self.lo}..{self.hi}"


@dataclass(frozen=True)
class Instruction:
    opcode: str
    dst: str | None = None
    srcs: tuple[str, ...] = ()
    imm: int | None = None
    label: str | None = None
    callee: str | None = None
    bound: LoopBound | None = None
    line: int | None = field(default=None, compare=False)

    @property
    def channel(self) -> int | None:
        return self.imm if self.opcode in ("IN", "OUT") else None

    @property
    def is_terminator(self) -> bool:
        return self.opcode in TERMINATOR_OF


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: tuple[Instruction, ...]
    line: int | None = field(default=None, compare=False)

    @property
    def last(self) -> Instruction:
        return self.instructions[-1]

    @property
    def terminator(self) -> Terminator:
        return TERMINATOR_OF.get(self.last.opcode, Terminator.FALLTHROUGH)


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    blocks: tuple[BasicBlock, ...]
    line: int | None = field(default=None, compare=False)

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    @property
    def block_map(self) -> Mapping[str, BasicBlock]:
        return MappingProxyType({block.label: block for block in self.blocks})

    def block_index(self, label: str) -> int:
        for index, block in enumerate(self.blocks):
            if block.label == label:
                return index
        raise KeyError(label)

    def successors(self, label: str) -> list[str]:
        """Successor labels of a block, taken target first."""
        index = self.block_index(label)
        block = self.blocks[index]
        terminator = block.terminator
        following = self.blocks[index + 1].label if index + 1 < len(self.blocks) else None
        if terminator is Terminator.JUMP:
            return [block.last.label]
        if terminator is Terminator.BRANCH:
            targets = [block.last.label]
            if following is not None and following not in targets:
                targets.append(following)
            return targets
        if terminator is Terminator.FALLTHROUGH:
            return [following] if following is not None else []
        return []

    @property
    def loop_bounds(self) -> Mapping[BackEdge, LoopBound]:
        """Bounds annotated on branches, keyed by (source block, target block)."""
        bounds = {}
        for block in self.blocks:
            if block.last.bound is not None:
                bounds[(block.label, block.last.label)] = block.last.bound
        return MappingProxyType(bounds)

    def instructions(self) -> Iterator[tuple[BasicBlock, int, Instruction]]:
        for block in self.blocks:
            for index, instruction in enumerate(block.instructions):
                yield block, index, instruction


@dataclass(frozen=True)
class InputDomain:
    name: str
    lo: int
    hi: int


@dataclass(frozen=True)
class Program:
    functions: tuple[Function, ...]
    entry: str
    domains: tuple[InputDomain, ...] = ()

    @property
    def function_map(self) -> Mapping[str, Function]:
        return MappingProxyType({function.name: function for function in self.functions})

    def function(self, name: str) -> Function:
        for function in self.functions:
            if function.name == name:
                return function
        raise KeyError(name)

    @property
    def entry_function(self) -> Function:
        return self.function(self.entry)

    def opcodes(self) -> set[str]:
        return {
            instruction.opcode
            for function in self.functions
            for _, _, instruction in function.instructions()
        }
