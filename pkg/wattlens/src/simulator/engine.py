from __future__ import annotations

import logging
import re
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Callable, Mapping

from core.conf import setting
from energy.domain import DEFAULT_ISA
from machine.constants import MEMORY_WORDS, REGISTER_COUNT, WORD_MASK
from machine.domain import Function, Instruction, Program
from simulator.constants import (
    DEFAULT_CHANNEL_LATENCY,
    DEFAULT_FUEL,
    MAIN_THREAD,
    MAX_CALL_DEPTH,
    Outcome,
    ThreadStatus,
)
from simulator.domain import (
    CallDepthError,
    InputError,
    MemoryAccessError,
    PerThreadCounts,
    SimulationError,
    ThreadLimitError,
    Trace,
    TraceEvent,
)

logger = logging.getLogger(__name__)

MEMORY_INPUT = re.compile(r"^mem\[(\d+)\]$")

ALU: dict[str, Callable[[int, int], int]] = {
    "ADD": lambda a, b: a + b,
    "SUB": lambda a, b: a - b,
    "MUL": lambda a, b: a * b,
    "AND": lambda a, b: a & b,
    "XOR": lambda a, b: a ^ b,
    "SHL": lambda a, b: a << (b & 31),
}


def _reg(name: str) -> int:
    return int(name[1:])


@dataclass
class _Frame:
    function: Function
    block: int
    index: int
    registers: list[int]
    return_to: int | None = None

    @property
    def instruction(self) -> Instruction:
        return self.function.blocks[self.block].instructions[self.index]

    def advance(self) -> None:
        self.index += 1
        if self.index == len(self.function.blocks[self.block].instructions):
            self.block += 1
            self.index = 0


@dataclass
class _Thread:
    tid: int
    frames: list[_Frame]
    status: ThreadStatus = ThreadStatus.RUNNING
    resume_at: int | None = None
    final_registers: tuple[int, ...] = ()

    def finish(self, registers: list[int]) -> None:
        self.status = ThreadStatus.DONE
        self.final_registers = tuple(registers)
        self.frames.clear()


@dataclass
class _Hold:
    thread: _Thread
    opcode: str
    function: str
    block: str
    stage: int
    remaining: int


@dataclass
class Machine:
    """Cycle-level interpreter of one EIR program.

    Threads are scheduled round-robin by thread id among the runnable ones,
    one issue slot per cycle. An instruction taking several issue cycles keeps
    the slot for all of them.
    """

    program: Program
    t_max: int
    channel_latency: int = DEFAULT_CHANNEL_LATENCY
    record_events: bool = True
    memory: list[int] = field(default_factory=lambda: [0] * MEMORY_WORDS)
    threads: list[_Thread] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._labels = {
            function.name: {block.label: index for index, block in enumerate(function.blocks)}
            for function in self.program.functions
        }
        self._senders: dict[int, deque[tuple[_Thread, int]]] = defaultdict(deque)
        self._receivers: dict[int, deque[tuple[_Thread, int]]] = defaultdict(deque)
        self._events: list[TraceEvent] = []
        self._issues: dict[int, Counter[str]] = defaultdict(Counter)
        self._active: Counter[int] = Counter()

    def load_inputs(self, inputs: Mapping[str, int]) -> None:
        main = self.threads[MAIN_THREAD].frames[0].registers
        for name, value in inputs.items():
            key = name.strip().lower()
            match = MEMORY_INPUT.match(key)
            if match:
                address = int(match.group(1))
                if address >= MEMORY_WORDS:
                    raise InputError(f"input {name!r} is outside memory of {MEMORY_WORDS} words")
                self.memory[address] = int(value) & WORD_MASK
            elif re.fullmatch(r"r\d+", key) and int(key[1:]) < REGISTER_COUNT:
                main[int(key[1:])] = int(value) & WORD_MASK
            else:
                raise InputError(f"input {name!r} names neither a register nor mem[N]")

    def spawn(self, function: Function, arguments: list[int]) -> _Thread:
        registers = [0] * REGISTER_COUNT
        registers[: len(arguments)] = arguments
        thread = _Thread(tid=len(self.threads), frames=[_Frame(function, 0, 0, registers)])
        self.threads.append(thread)
        return thread

    def run(self, fuel: int) -> Trace:
        if fuel <= 0:
            raise SimulationError("fuel must be positive")
        cycle = 0
        last_tid = -1
        hold: _Hold | None = None
        outcome = Outcome.FUEL_EXHAUSTED
        while cycle < fuel:
            for thread in self.threads:
                if thread.status is ThreadStatus.TRANSFER and thread.resume_at <= cycle:
                    thread.status = ThreadStatus.RUNNING
                    thread.resume_at = None
            running = [thread for thread in self.threads if thread.status is ThreadStatus.RUNNING]
            if not running:
                if any(thread.status is ThreadStatus.TRANSFER for thread in self.threads):
                    cycle += 1
                    continue
                if any(thread.status is ThreadStatus.WAITING for thread in self.threads):
                    outcome = Outcome.DEADLOCK
                else:
                    outcome = Outcome.HALTED
                break

            act = len(running)
            for thread in running:
                self._active[thread.tid] += 1

            if hold is not None:
                self._emit(cycle, hold.thread.tid, hold.opcode, act, hold.function, hold.block, hold.stage)
                hold.stage += 1
                hold.remaining -= 1
                if not hold.remaining:
                    hold = None
                cycle += 1
                continue

            thread = next((t for t in running if t.tid > last_tid), running[0])
            last_tid = thread.tid
            frame = thread.frames[-1]
            instruction = frame.instruction
            block = frame.function.blocks[frame.block].label
            function = frame.function.name
            self._emit(cycle, thread.tid, instruction.opcode, act, function, block, 0)
            self._execute(thread, instruction, cycle)
            issue_cycles = DEFAULT_ISA[instruction.opcode].issue_cycles
            if issue_cycles > 1:
                hold = _Hold(thread, instruction.opcode, function, block, 1, issue_cycles - 1)
            cycle += 1

        if outcome is Outcome.DEADLOCK:
            logger.info("Deadlock at cycle %s: every live thread waits on a channel", cycle)
        elif outcome is Outcome.FUEL_EXHAUSTED:
            logger.info("Fuel of %s cycles exhausted", fuel)

        main = self.threads[MAIN_THREAD]
        registers = main.final_registers if main.status is ThreadStatus.DONE else tuple(main.frames[-1].registers)
        counts = PerThreadCounts(
            issues={tid: dict(ops) for tid, ops in self._issues.items()},
            active={thread.tid: self._active[thread.tid] for thread in self.threads},
            wall=cycle,
        )
        return Trace(
            outcome=outcome,
            total_cycles=cycle,
            counts=counts,
            events=tuple(self._events),
            registers=registers,
            memory=tuple(self.memory),
            recorded=self.record_events,
        )

    def _emit(self, cycle: int, tid: int, opcode: str, act: int, function: str, block: str, stage: int) -> None:
        self._issues[tid][opcode] += 1
        if self.record_events:
            self._events.append(TraceEvent(cycle, tid, opcode, act, function, block, stage))

    def _jump(self, frame: _Frame, label: str) -> None:
        frame.block = self._labels[frame.function.name][label]
        frame.index = 0

    def _address(self, registers: list[int], instruction: Instruction) -> int:
        # LDW rd, ra, imm and STW rs, ra, imm: the base register is the last source.
        address = (registers[_reg(instruction.srcs[-1])] + instruction.imm) & WORD_MASK
        if address >= MEMORY_WORDS:
            raise MemoryAccessError(
                f"{instruction.opcode} at line {instruction.line}: address {address} outside 0..{MEMORY_WORDS - 1}"
            )
        return address

    def _call(self, thread: _Thread, instruction: Instruction) -> _Frame:
        if len(thread.frames) >= MAX_CALL_DEPTH:
            raise CallDepthError(f"thread {thread.tid}: call depth exceeds {MAX_CALL_DEPTH}")
        callee = self.program.function(instruction.callee)
        caller = thread.frames[-1].registers
        first = _reg(instruction.dst)
        arguments = [caller[(first + k) % REGISTER_COUNT] for k in range(len(callee.params))]
        registers = [0] * REGISTER_COUNT
        registers[: len(arguments)] = arguments
        return _Frame(callee, 0, 0, registers, return_to=first)

    def _execute(self, thread: _Thread, instruction: Instruction, cycle: int) -> None:
        frame = thread.frames[-1]
        registers = frame.registers
        opcode = instruction.opcode

        if opcode == "LDC":
            registers[_reg(instruction.dst)] = instruction.imm & WORD_MASK
        elif opcode in ALU:
            a, b = (registers[_reg(name)] for name in instruction.srcs)
            registers[_reg(instruction.dst)] = ALU[opcode](a, b) & WORD_MASK
        elif opcode == "LDW":
            registers[_reg(instruction.dst)] = self.memory[self._address(registers, instruction)]
        elif opcode == "STW":
            self.memory[self._address(registers, instruction)] = registers[_reg(instruction.srcs[0])]
        elif opcode == "BRT":
            if registers[_reg(instruction.srcs[0])]:
                self._jump(frame, instruction.label)
                return
        elif opcode == "JMP":
            self._jump(frame, instruction.label)
            return
        elif opcode == "CALL":
            callee = self._call(thread, instruction)
            frame.advance()
            thread.frames.append(callee)
            return
        elif opcode == "RET":
            thread.frames.pop()
            if not thread.frames:
                thread.finish(registers)
                return
            caller = thread.frames[-1]
            caller.registers[frame.return_to] = registers[0]
            return
        elif opcode == "FORK":
            live = sum(1 for other in self.threads if other.status is not ThreadStatus.DONE)
            if live >= self.t_max:
                raise ThreadLimitError(f"FORK at line {instruction.line} exceeds {self.t_max} hardware threads")
            child = self._call(thread, instruction)
            self.spawn(child.function, child.registers[: len(child.function.params)])
        elif opcode == "OUT":
            self._send(thread, instruction.channel, registers[_reg(instruction.srcs[0])], cycle)
        elif opcode == "IN":
            self._receive(thread, instruction.channel, _reg(instruction.dst), cycle)
        elif opcode == "HALT":
            thread.finish(registers)
            return
        frame.advance()

    def _complete(self, sender: _Thread, receiver: _Thread, value: int, register: int, cycle: int) -> None:
        receiver.frames[-1].registers[register] = value
        for thread in (sender, receiver):
            thread.status = ThreadStatus.TRANSFER
            thread.resume_at = cycle + 1 + self.channel_latency

    def _send(self, thread: _Thread, channel: int, value: int, cycle: int) -> None:
        if self._receivers[channel]:
            receiver, register = self._receivers[channel].popleft()
            self._complete(thread, receiver, value, register, cycle)
        else:
            self._senders[channel].append((thread, value))
            thread.status = ThreadStatus.WAITING

    def _receive(self, thread: _Thread, channel: int, register: int, cycle: int) -> None:
        if self._senders[channel]:
            sender, value = self._senders[channel].popleft()
            self._complete(sender, thread, value, register, cycle)
        else:
            self._receivers[channel].append((thread, register))
            thread.status = ThreadStatus.WAITING


def run(
    program: Program,
    inputs: Mapping[str, int] | None = None,
    *,
    fuel: int | None = None,
    t_max: int | None = None,
    channel_latency: int | None = None,
    record_events: bool = True,
) -> Trace:
    """Execute ``program`` from its entry function and return the trace.

    ``inputs`` binds registers of the entry frame (``r0``..``r11``) and
    memory words (``mem[N]``). Deadlock and fuel exhaustion are outcomes, not
    errors.
    """
    machine = Machine(
        program=program,
        t_max=t_max if t_max is not None else setting("WATTLENS_T_MAX", 8),
        channel_latency=(
            channel_latency
            if channel_latency is not None
            else setting("WATTLENS_CHANNEL_LATENCY", DEFAULT_CHANNEL_LATENCY)
        ),
        record_events=record_events,
    )
    machine.spawn(program.entry_function, [])
    machine.load_inputs(inputs or {})
    trace = machine.run(fuel if fuel is not None else setting("WATTLENS_FUEL", DEFAULT_FUEL))
    logger.debug("Simulated %s in %s cycles (%s)", program.entry, trace.total_cycles, trace.outcome.value)
    return trace
