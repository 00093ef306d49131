"""Maquina virtual: fetch/decode/execute sobre MachineState con modelo de ciclos.

Tabla de ciclos: NISC = 1; Mix(n) = n + 2 (+ ceil(log2 K) si K > 1);
AmSearch(m) = (m + 2) * K; Intr/Jmp/Part/LoopStart/Evict/Load = 1; Halt = 0.
Los rebobinados de bucle no cuestan ciclos.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from app.core.config import settings
from app.core.errors import (
    HostWriteError,
    InterruptPendingError,
    InvalidPcError,
    LoopStackOverflowError,
    NoPendingInterruptError,
    OperandRangeError,
    StreamUnderrunError,
    WidthMismatchError,
)
from app.models.encoder import EncoderOp, EncoderState
from app.models.hypervector import HyperVector
from app.models.instruction import (
    MAX_LOOP_DEPTH,
    AmSearch,
    EvictPlane,
    Halt,
    InputSelect,
    Intr,
    Jmp,
    LoadPlane,
    LoopStart,
    Mix,
    MixSource,
    NiscInstruction,
    PartAction,
    PartCounter,
    Program,
)
from app.models.machine import InputStream, LoopFrame, MachineState
from app.models.memory import AssociativeMemory, interrupt_eval
from app.schemas.reports import (
    InterruptEvent,
    InterruptPolicy,
    RunReport,
    RunStatus,
    SearchSummary,
    StepReport,
)
from app.services.encoder_service import (
    EncoderContext,
    bundle_accumulate,
    bundle_threshold,
    counter_evict_plane,
    counter_load_plane,
    encoder_op,
    manipulate,
    mix_step,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["cycle", "pc", "mnemonic", "part_counter"]


class TraceRecorder:
    """Una fila por instruccion retirada; `cycle` es el contador tras retirarla."""

    def __init__(self):
        self.rows: list[tuple[int, int, str, int]] = []

    def record(self, cycle: int, pc: int, mnemonic: str, part_counter: int) -> None:
        self.rows.append((cycle, pc, mnemonic, part_counter))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRACE_COLUMNS)

    def write_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False)
        logger.info(f"[VM] Wrote trace with {len(self.rows)} rows to {path}")


class VirtualMachine:
    def __init__(
        self,
        context: EncoderContext,
        policy: Union[InterruptPolicy, str] = None,
        tracer: Optional[TraceRecorder] = None,
    ):
        self.context = context
        self.geometry = context.geometry
        self.policy = InterruptPolicy(policy or settings.interrupt_policy)
        self.tracer = tracer

    # --- host -----------------------------------------------------------------

    def new_state(self, program: Program, memory: Optional[AssociativeMemory] = None) -> MachineState:
        memory = memory or AssociativeMemory(self.geometry)
        if memory.geometry != self.geometry:
            raise WidthMismatchError(memory.geometry.d, self.geometry.d)
        return MachineState(program=program, am=memory, enc=EncoderState.fresh(self.geometry.width))

    def load_prototypes(self, state: MachineState, image: AssociativeMemory) -> None:
        """Copia las filas por debajo del slot de busqueda desde una imagen."""
        if image.geometry != self.geometry:
            raise WidthMismatchError(image.geometry.d, self.geometry.d)
        state.am.copy_rows_from(image, range(0, self.geometry.search_slot))

    def host_write(self, state: MachineState, addr: int, part: int, v: HyperVector) -> None:
        if not 0 <= addr < self.geometry.search_slot:
            raise HostWriteError(f"host writes must target rows below the search slot {self.geometry.search_slot}")
        state.am.write(addr, part, v)

    def ack_interrupt(self, state: MachineState) -> InterruptEvent:
        if state.pending_interrupt is None:
            raise NoPendingInterruptError("no pending interrupt to acknowledge")
        event = state.pending_interrupt
        state.pending_interrupt = None
        logger.debug(f"[VM] Host acknowledged interrupt raised at cycle {event.cycle}")
        return event

    # --- ejecucion ------------------------------------------------------------

    def step(self, state: MachineState, stream: Optional[InputStream] = None) -> StepReport:
        if state.pending_interrupt is not None:
            raise InterruptPendingError("interrupt pending; the host must acknowledge it first")
        program = state.program
        if state.halted or not 0 <= state.pc < len(program):
            raise InvalidPcError(f"pc {state.pc} outside program of {len(program)} words")
        stream = stream if stream is not None else InputStream()
        pc = state.pc
        part = state.part_counter
        instr = program.instructions[pc]
        next_pc = pc + 1
        event = None

        if isinstance(instr, NiscInstruction):
            self._execute_nisc(state, instr, stream)
            cycles = 1
        elif isinstance(instr, Mix):
            cycles = self._execute_mix(state, instr, stream)
        elif isinstance(instr, AmSearch):
            state.last_search = state.am.associative_search(instr.max_index)
            cycles = (instr.max_index + 2) * self.geometry.k
        elif isinstance(instr, Intr):
            event = self._execute_intr(state, instr, pc)
            cycles = 1
        elif isinstance(instr, LoopStart):
            if len(state.loop_stack) >= MAX_LOOP_DEPTH:
                raise LoopStackOverflowError(f"pc {pc}: more than {MAX_LOOP_DEPTH} nested hardware loops")
            if instr.iterations == 0 or instr.end_address == pc + 1:
                # cuerpo vacio o sin vueltas: solo cuesta el ciclo de arranque
                next_pc = instr.end_address
            else:
                state.loop_stack.append(LoopFrame(start=pc + 1, end=instr.end_address, remaining=instr.iterations))
            cycles = 1
        elif isinstance(instr, Jmp):
            next_pc = instr.target
            cycles = 1
        elif isinstance(instr, PartCounter):
            k = self.geometry.k
            if instr.action is PartAction.CLEAR:
                state.part_counter = 0
            elif instr.action is PartAction.INC:
                state.part_counter = (part + 1) % k
            else:
                state.part_counter = (part - 1) % k
            cycles = 1
        elif isinstance(instr, EvictPlane):
            state.am.write(instr.widx, part, counter_evict_plane(state.enc, instr.plane))
            cycles = 1
        elif isinstance(instr, LoadPlane):
            counter_load_plane(state.enc, instr.plane, state.am.read(instr.ridx, part))
            cycles = 1
        elif isinstance(instr, Halt):
            state.halted = True
            cycles = 0
        else:
            raise InvalidPcError(f"pc {pc}: cannot execute {instr!r}")

        state.cycles += cycles
        state.retired += 1
        if not state.halted:
            state.pc = next_pc
            self._close_loops(state)
        if self.tracer is not None:
            self.tracer.record(state.cycles, pc, instr.mnemonic, part)
        return StepReport(pc=pc, mnemonic=instr.mnemonic, cycles=cycles, interrupt=event)

    def run(self, state: MachineState, stream: Optional[InputStream] = None, limit: Optional[int] = None) -> RunReport:
        stream = stream if stream is not None else InputStream()
        limit = settings.max_cycles if limit is None else limit
        budget_end = state.cycles + limit
        start_cycles = state.cycles
        start_retired = state.retired
        interrupts: list[InterruptEvent] = []
        while True:
            if state.halted:
                status = RunStatus.HALTED
                break
            if state.pending_interrupt is not None:
                status = RunStatus.BLOCKED
                break
            if state.cycles >= budget_end:
                status = RunStatus.CYCLE_LIMIT
                break
            report = self.step(state, stream)
            if report.interrupt is not None:
                interrupts.append(report.interrupt)

        logger.debug(
            f"[VM] Run finished: {status.value} after {state.cycles - start_cycles} cycles, "
            f"{len(interrupts)} interrupt(s)"
        )
        return RunReport(
            status=status,
            cycles=state.cycles - start_cycles,
            retired=state.retired - start_retired,
            interrupts=interrupts,
            last_search=SearchSummary.from_result(state.last_search),
            final_state=state,
        )

    # --- detalle de instrucciones --------------------------------------------

    def _close_loops(self, state: MachineState) -> None:
        stack = state.loop_stack
        while stack and stack[-1].end == state.pc:
            frame = stack[-1]
            frame.remaining -= 1
            if frame.remaining > 0:
                state.pc = frame.start
                return
            stack.pop()

    def _sample(self, state: MachineState, stream: InputStream, reuse: bool) -> int:
        if reuse:
            if state.latched_sample is None:
                raise StreamUnderrunError("no latched sample to reuse")
            return state.latched_sample
        state.latched_sample = stream.next()
        return state.latched_sample

    def _execute_nisc(self, state: MachineState, instr: NiscInstruction, stream: InputStream) -> None:
        ctx = self.context
        enc = state.enc
        part = state.part_counter
        if instr.encsel is InputSelect.ZERO:
            a = HyperVector.zeros(ctx.width)
        elif instr.encsel is InputSelect.SEED:
            a = ctx.seed_vector
        elif instr.encsel is InputSelect.AM:
            a = state.am.read(instr.ridx, part)
        else:
            a = enc.output_register
        if instr.smen:
            a = manipulate(a, self._sample(state, stream, instr.smsel), ctx.manipulator)
        if instr.mxen:
            a = mix_step(a, int(instr.mxsel), bool(instr.mxinv), ctx.mixer)
        if instr.op is EncoderOp.THRESH:
            out = bundle_threshold(enc)
        else:
            out = encoder_op(instr.op, a, enc.output_register)
        if instr.bndrst:
            enc.counters.reset()
        if instr.bnden:
            bundle_accumulate(enc, out)
        enc.output_register = out
        if instr.wben:
            state.am.write(instr.widx, part, out)

    def _execute_mix(self, state: MachineState, instr: Mix, stream: InputStream) -> int:
        if instr.source is MixSource.IMMEDIATE:
            w = instr.value
        elif instr.source is MixSource.PART_COUNTER:
            w = state.part_counter
        else:
            w = self._sample(state, stream, instr.source is MixSource.LATCHED)
        if instr.nbits and w >= (1 << instr.nbits):
            raise OperandRangeError(f"mix operand {w} does not fit in {instr.nbits} bits")
        start = self.context.seed_vector if instr.from_seed else state.enc.output_register
        state.enc.output_register = self.context.mix_operand(start, w, instr.nbits, state.part_counter)
        extra = self.geometry.part_bits if self.geometry.k > 1 else 0
        return instr.nbits + 2 + extra

    def _execute_intr(self, state: MachineState, instr: Intr, pc: int) -> Optional[InterruptEvent]:
        result = state.last_search
        if result is None or not interrupt_eval(result, instr.sim_threshold, instr.index_threshold):
            return None
        event = InterruptEvent(
            cycle=state.cycles + 1,
            pc=pc,
            index=result.index,
            distance=result.distance,
            sim_threshold=instr.sim_threshold,
            index_threshold=instr.index_threshold,
        )
        logger.debug(f"[VM] Interrupt at cycle {event.cycle}: index={result.index} distance={result.distance}")
        if self.policy is InterruptPolicy.BLOCK:
            state.pending_interrupt = event
        return event
