from __future__ import annotations

import logging
from collections import Counter
from fractions import Fraction

import networkx as nx

from energy.domain import EnergyModel
from energy.services import instruction_energy
from machine.cfg import Cfg, FunctionCfg, Loop, build_cfg, validate_for_analysis
from machine.domain import Function, Program
from staticanalysis.domain import (
    AnalysisError,
    BlockKey,
    BoundKind,
    EnergyBound,
    PathCost,
    ProfileEntry,
    StaticProfile,
)

logger = logging.getLogger(__name__)

SINK = object()


class _Region:
    """Best paths from a region's entry to each way of leaving it."""

    def __init__(self) -> None:
        self.latch: PathCost | None = None
        self.exits: dict[str, PathCost] = {}
        self.sink: PathCost | None = None


def call_graph(program: Program) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(function.name for function in program.functions)
    for function in program.functions:
        for _, _, instruction in function.instructions():
            if instruction.callee is not None:
                graph.add_edge(function.name, instruction.callee)
    return graph


class BoundSolver:
    """Structural longest (upper) or shortest (lower) path over loop-bounded CFGs.

    Each loop is solved innermost first: its best iteration repeats as often
    as its bound allows and is followed by the best way out. The loop then
    stands in its enclosing region as one node.
    """

    def __init__(self, program: Program, cfg: Cfg, model: EnergyModel, kind: BoundKind, thread_level: int):
        self.program = program
        self.cfg = cfg
        self.model = model
        self.kind = kind
        self.thread_level = thread_level
        self.local_costs: dict[BlockKey, Fraction] = {}
        self._functions: dict[str, PathCost] = {}
        self._loops: dict[tuple[str, str], _Region] = {}

    @property
    def upper(self) -> bool:
        return self.kind is BoundKind.UPPER

    def _pick(self, current: PathCost | None, candidate: PathCost) -> PathCost:
        if current is None:
            return candidate
        if self.upper:
            return candidate if candidate.cost > current.cost else current
        return candidate if candidate.cost < current.cost else current

    def local_cost(self, function: Function, label: str) -> Fraction:
        key = (function.name, label)
        if key not in self.local_costs:
            block = function.block_map[label]
            self.local_costs[key] = sum(
                (
                    self.model.spec(instruction.opcode).issue_cycles
                    * instruction_energy(self.model, instruction.opcode, self.thread_level)
                    for instruction in block.instructions
                ),
                Fraction(0),
            )
        return self.local_costs[key]

    def block_path(self, function: Function, label: str) -> PathCost:
        path = PathCost(self.local_cost(function, label), Counter({(function.name, label): 1}))
        for instruction in function.block_map[label].instructions:
            if instruction.callee is not None:
                path = path + self.function_path(instruction.callee)
        return path

    def function_path(self, name: str) -> PathCost:
        if name not in self._functions:
            function = self.program.function(name)
            function_cfg = self.cfg[name]
            region = self._region(function, function_cfg, function_cfg.entry, function_cfg.reachable, None)
            if region.sink is None:
                raise AnalysisError(f"function {name} has no bounded path to RET or HALT")
            self._functions[name] = region.sink
        return self._functions[name]

    def _loop(self, function: Function, function_cfg: FunctionCfg, loop: Loop) -> _Region:
        key = (function.name, loop.header)
        if key in self._loops:
            return self._loops[key]
        inner = self._region(function, function_cfg, loop.header, loop.body, loop.header)
        bound = loop.bound(function)
        if bound is None or inner.latch is None:
            raise AnalysisError(f"loop at {function.name}:{loop.header} has no usable bound")
        iterations = bound.hi if self.upper else bound.lo
        repeated = inner.latch.scaled(iterations)
        summary = _Region()
        summary.exits = {target: repeated + path for target, path in inner.exits.items()}
        if inner.sink is not None:
            # Returning from inside the loop may cut its iterations short.
            summary.sink = repeated + inner.sink if self.upper else inner.sink
        self._loops[key] = summary
        return summary

    def _region(
        self,
        function: Function,
        function_cfg: FunctionCfg,
        entry: str,
        body: frozenset[str],
        header: str | None,
    ) -> _Region:
        children = [
            loop for loop in function_cfg.loops
            if loop.parent == header and loop.header in body and loop.header != header
        ]
        owner = {label: child for child in children for label in child.body}

        def node_of(label: str) -> str:
            return owner[label].header if label in owner else label

        nodes: list[str] = []
        options: dict[str, list[tuple[PathCost, object]]] = {}
        for label in function_cfg.order:
            if label not in body or label not in function_cfg.reachable:
                continue
            node = node_of(label)
            if node in options:
                continue
            nodes.append(node)
            if label in owner:
                summary = self._loop(function, function_cfg, owner[label])
                choices: list[tuple[PathCost, object]] = list(
                    (path, target) for target, path in summary.exits.items()
                )
                if summary.sink is not None:
                    choices.append((summary.sink, SINK))
            else:
                path = self.block_path(function, label)
                successors = function_cfg.successors[label]
                choices = [
                    (path + PathCost(edges=Counter({(function.name, label, target): 1})), target)
                    for target in successors
                ]
                if not successors:
                    choices.append((path, SINK))
            options[node] = choices

        graph = nx.DiGraph()
        graph.add_nodes_from(nodes)
        for node, choices in options.items():
            for _, target in choices:
                if target is not SINK and target in body and target != header:
                    graph.add_edge(node, node_of(target))
        if not nx.is_directed_acyclic_graph(graph):
            raise AnalysisError(f"function {function.name}: cycle outside any natural loop")
        position = {node: index for index, node in enumerate(nodes)}

        region = _Region()
        arrive: dict[str, PathCost] = {node_of(entry): PathCost()}
        for node in nx.lexicographical_topological_sort(graph, key=position.__getitem__):
            if node not in arrive:
                continue
            for path, target in options[node]:
                candidate = arrive[node] + path
                if target is SINK:
                    region.sink = self._pick(region.sink, candidate)
                elif target == header:
                    region.latch = self._pick(region.latch, candidate)
                elif target not in body:
                    region.exits[target] = self._pick(region.exits.get(target), candidate)
                else:
                    successor = node_of(target)
                    arrive[successor] = self._pick(arrive.get(successor), candidate)
        return region


def _prepare(program: Program, cfg: Cfg | None) -> Cfg:
    cfg = cfg or build_cfg(program)
    diagnostics = validate_for_analysis(program, cfg)
    if diagnostics:
        raise AnalysisError("program cannot be analysed", diagnostics)
    graph = call_graph(program)
    cycles = list(nx.simple_cycles(graph))
    if cycles:
        cycle = " -> ".join(min(cycles, key=len) + [min(cycles, key=len)[0]])
        raise AnalysisError(f"recursion is not supported: {cycle}")
    return cfg


def _bound(program: Program, cfg: Cfg | None, model: EnergyModel, n_threads: int, kind: BoundKind) -> EnergyBound:
    cfg = _prepare(program, cfg)
    level = model.conservative_thread_level(n_threads, upper=kind is BoundKind.UPPER)
    solver = BoundSolver(program, cfg, model, kind, level)
    path = solver.function_path(program.entry)

    opcodes = program.opcodes()
    notes = []
    idle_excluded = bool(opcodes & {"IN", "OUT"}) or n_threads > 1
    if idle_excluded:
        notes.append("idle energy from channel waits is excluded from this bound")
    if "FORK" in opcodes:
        notes.append(f"forked threads are bounded separately and summed at thread level {level}")
        if n_threads == 1:
            notes.append("program forks threads but was analysed for a single thread")

    per_block = {key: count * solver.local_costs[key] for key, count in path.blocks.items()}
    bound = EnergyBound(
        kind=kind,
        value=path.cost,
        block_counts=dict(path.blocks),
        edge_counts=dict(path.edges),
        per_block=per_block,
        thread_level=level,
        n_threads=n_threads,
        idle_excluded=idle_excluded,
        notes=tuple(notes),
    )
    logger.info("%s bound of %s: %.3f pJ at t=%s", kind.value, program.entry, float(path.cost), level)
    return bound


def wcec(program: Program, cfg: Cfg | None, model: EnergyModel, n_threads: int = 1) -> EnergyBound:
    """Worst-case energy upper bound of ``program`` from its entry function."""
    return _bound(program, cfg, model, n_threads, BoundKind.UPPER)


def bcec(program: Program, cfg: Cfg | None, model: EnergyModel, n_threads: int = 1) -> EnergyBound:
    """Best-case energy lower bound; loops run their annotated minimum."""
    return _bound(program, cfg, model, n_threads, BoundKind.LOWER)


def profile_from_bound(bound: EnergyBound) -> StaticProfile:
    total = sum(bound.per_block.values(), Fraction(0))

    def share(value: Fraction) -> float:
        return float(value / total) if total else 0.0

    blocks = {
        f"{function}:{label}": ProfileEntry(value, share(value))
        for (function, label), value in bound.per_block.items()
    }
    functions = {name: ProfileEntry(value, share(value)) for name, value in sorted(bound.per_function.items())}
    return StaticProfile(blocks=blocks, functions=functions, total=total, notes=bound.notes)


def static_profile(program: Program, cfg: Cfg | None, model: EnergyModel, n_threads: int = 1) -> StaticProfile:
    """Share of worst-case energy spent in each block and function."""
    return profile_from_bound(wcec(program, cfg, model, n_threads))
