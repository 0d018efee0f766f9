from __future__ import annotations

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import networkx as nx

from machine.constants import Terminator
from machine.domain import BackEdge, Function, LoopBound, Program

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Loop:
    """A natural loop: every back edge into ``header`` merged into one body."""

    header: str
    body: frozenset[str]
    back_edges: tuple[BackEdge, ...]
    parent: str | None = None
    depth: int = 1

    def exits(self, successors: Mapping[str, tuple[str, ...]]) -> list[tuple[str, str]]:
        return [
            (label, target)
            for label in sorted(self.body)
            for target in successors[label]
            if target not in self.body
        ]

    def bound(self, function: Function) -> LoopBound | None:
        """Sum of the back-edge bounds, or None when one of them is missing."""
        bounds = function.loop_bounds
        lo = hi = 0
        for edge in self.back_edges:
            if edge not in bounds:
                return None
            lo += bounds[edge].lo
            hi += bounds[edge].hi
        return LoopBound(lo, hi)


@dataclass(frozen=True)
class FunctionCfg:
    name: str
    entry: str
    order: tuple[str, ...]
    successors: Mapping[str, tuple[str, ...]]
    idom: Mapping[str, str]
    loops: tuple[Loop, ...]
    reducible: bool
    retreating_edges: tuple[BackEdge, ...] = ()
    graph: nx.DiGraph = field(default=None, compare=False, repr=False)

    @property
    def reachable(self) -> frozenset[str]:
        return frozenset(self.idom)

    @property
    def back_edges(self) -> tuple[BackEdge, ...]:
        return tuple(edge for loop in self.loops for edge in loop.back_edges)

    def predecessors(self, label: str) -> list[str]:
        return [source for source in self.order if label in self.successors[source]]

    def dominators(self, label: str) -> set[str]:
        if label not in self.idom:
            return set()
        result = {label}
        while label != self.entry:
            label = self.idom[label]
            result.add(label)
        return result

    def dominates(self, a: str, b: str) -> bool:
        return a in self.dominators(b)

    def loop(self, header: str) -> Loop:
        for loop in self.loops:
            if loop.header == header:
                return loop
        raise KeyError(header)

    def innermost_loop(self, label: str) -> Loop | None:
        candidates = [loop for loop in self.loops if label in loop.body]
        return max(candidates, key=lambda loop: loop.depth, default=None)

    @property
    def max_depth(self) -> int:
        return max((loop.depth for loop in self.loops), default=0)


@dataclass(frozen=True)
class Cfg:
    functions: Mapping[str, FunctionCfg]

    def __getitem__(self, name: str) -> FunctionCfg:
        return self.functions[name]

    @property
    def reducible(self) -> bool:
        return all(function.reducible for function in self.functions.values())


@dataclass(frozen=True)
class Diagnostic:
    function: str
    message: str
    block: str | None = None
    line: int | None = None

    def __str__(self) -> str:
        where = self.function if self.block is None else f"{self.function}:{self.block}"
        if self.line is not None:
            where = f"{where} (line {self.line})"
        return f"{where}: {self.message}"


def _retreating_edges(entry: str, successors: Mapping[str, tuple[str, ...]]) -> list[BackEdge]:
    """Edges to a node still on the DFS stack, visiting successors in order."""
    retreating: list[BackEdge] = []
    visited = {entry}
    on_stack = {entry}
    stack = [(entry, iter(successors[entry]))]
    while stack:
        node, pending = stack[-1]
        target = next(pending, None)
        if target is None:
            stack.pop()
            on_stack.discard(node)
            continue
        if target in on_stack:
            retreating.append((node, target))
        elif target not in visited:
            visited.add(target)
            on_stack.add(target)
            stack.append((target, iter(successors[target])))
    return retreating


def _natural_body(graph: nx.DiGraph, header: str, latches: list[str]) -> frozenset[str]:
    body = {header}
    work = [latch for latch in latches if latch != header]
    body.update(work)
    while work:
        node = work.pop()
        for pred in graph.predecessors(node):
            if pred not in body:
                body.add(pred)
                work.append(pred)
    return frozenset(body)


def build_function_cfg(function: Function) -> FunctionCfg:
    order = tuple(block.label for block in function.blocks)
    successors = {label: tuple(function.successors(label)) for label in order}

    graph = nx.DiGraph()
    graph.add_nodes_from(order)
    for label in order:
        graph.add_edges_from((label, target) for target in successors[label])
    reachable_graph = graph.subgraph(nx.descendants(graph, function.entry.label) | {function.entry.label})
    idom = dict(nx.immediate_dominators(reachable_graph, function.entry.label))
    idom.setdefault(function.entry.label, function.entry.label)

    def dominates(a: str, b: str) -> bool:
        while True:
            if a == b:
                return True
            if b == function.entry.label:
                return False
            b = idom[b]

    retreating = _retreating_edges(function.entry.label, successors)
    reducible = all(dominates(target, source) for source, target in retreating)

    latches: dict[str, list[str]] = {}
    for source in order:
        if source not in idom:
            continue
        for target in successors[source]:
            if dominates(target, source):
                latches.setdefault(target, []).append(source)

    bodies = {
        header: _natural_body(reachable_graph, header, sources)
        for header, sources in latches.items()
    }
    loops: list[Loop] = []
    for header in sorted(bodies, key=order.index):
        enclosing = [
            other for other in bodies
            if other != header and header in bodies[other]
        ]
        parent = min(enclosing, key=lambda other: len(bodies[other]), default=None)
        loops.append(
            Loop(
                header=header,
                body=bodies[header],
                back_edges=tuple((source, header) for source in latches[header]),
                parent=parent,
                depth=len(enclosing) + 1,
            )
        )
    loops.sort(key=lambda loop: (-loop.depth, order.index(loop.header)))

    return FunctionCfg(
        name=function.name,
        entry=function.entry.label,
        order=order,
        successors=MappingProxyType(successors),
        idom=MappingProxyType(idom),
        loops=tuple(loops),
        reducible=reducible,
        retreating_edges=tuple(retreating),
        graph=graph,
    )


def build_cfg(program: Program) -> Cfg:
    """Per-function successor maps, dominator trees and loop forests."""
    functions = {function.name: build_function_cfg(function) for function in program.functions}
    logger.debug(
        "Built CFG for %s functions, %s loops",
        len(functions),
        sum(len(cfg.loops) for cfg in functions.values()),
    )
    return Cfg(functions=MappingProxyType(functions))


def validate_for_analysis(program: Program, cfg: Cfg) -> list[Diagnostic]:
    """Reasons a program cannot be bounded statically; empty when it can."""
    diagnostics: list[Diagnostic] = []
    for function in program.functions:
        function_cfg = cfg[function.name]
        if not function_cfg.reducible:
            source, target = next(
                (edge for edge in function_cfg.retreating_edges if not function_cfg.dominates(edge[1], edge[0])),
                function_cfg.retreating_edges[0],
            )
            diagnostics.append(
                Diagnostic(
                    function=function.name,
                    block=source,
                    message=f"irreducible control flow: edge {source} -> {target} enters a cycle below its header",
                    line=function.block_map[source].last.line,
                )
            )
            continue
        bounds = function.loop_bounds
        for loop in function_cfg.loops:
            for source, target in loop.back_edges:
                if (source, target) in bounds:
                    continue
                block = function.block_map[source]
                annotatable = block.terminator in (Terminator.JUMP, Terminator.BRANCH) and block.last.label == target
                hint = "" if annotatable else " (fallthrough back edges cannot carry one; end the block with JMP)"
                diagnostics.append(
                    Diagnostic(
                        function=function.name,
                        block=source,
                        message=f"missing @bound on back edge {source} -> {target}{hint}",
                        line=block.last.line,
                    )
                )
    return diagnostics
