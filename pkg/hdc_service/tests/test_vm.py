import numpy as np
import pytest

from app.core.errors import (
    HostWriteError,
    InterruptPendingError,
    InvalidPcError,
    NoPendingInterruptError,
    OperandRangeError,
    StreamUnderrunError,
)
from app.models.hypervector import HyperVector, random_vector
from app.models.machine import InputStream
from app.models.memory import AssociativeMemory
from app.schemas.reports import InterruptPolicy, RunStatus
from app.schemas.run_config import Application
from app.services.algos import emg
from app.services.algos.programs import build_application_program
from app.services.assembler import assemble
from app.services.encoder_service import EncoderContext, im_map, manipulate
from app.services.vm_service import TRACE_COLUMNS, TraceRecorder, VirtualMachine


def run_text(ctx, text, samples=(), policy=InterruptPolicy.AUTO_ACK, tracer=None, limit=None):
    vm = VirtualMachine(ctx, policy, tracer)
    state = vm.new_state(assemble(text))
    report = vm.run(state, InputStream(samples), limit)
    return vm, state, report


def test_halt_costs_nothing(ctx_small):
    _, state, report = run_text(ctx_small, "halt")
    assert report.status is RunStatus.HALTED
    assert report.cycles == 0
    assert report.retired == 1
    assert state.halted


def test_nisc_costs_one_cycle(ctx_small):
    _, state, report = run_text(ctx_small, "seed -> mem[2]\nhalt")
    assert report.cycles == 1
    assert state.am.read(2, 0) == ctx_small.seed_vector


def test_mix_cost_and_result(ctx_small):
    _, state, report = run_text(ctx_small, "mix_ext 5, seed\nenc_reg -> mem[1]\nhalt", samples=[9])
    assert report.cycles == 5 + 2 + 1
    assert state.am.read(1, 0) == im_map(9, 5, ctx_small.mixer, ctx_small.seed_vector)


def test_mix_operand_must_fit(ctx_small):
    with pytest.raises(OperandRangeError):
        run_text(ctx_small, "mix_ext 3, seed\nhalt", samples=[8])


def test_manipulator_and_latched_reuse(ctx_small):
    text = "seed -> man ext -> mem[1]\nseed -> man latched -> mem[2]\nhalt"
    _, state, _ = run_text(ctx_small, text, samples=[40])
    expected = manipulate(ctx_small.seed_vector, 40, ctx_small.manipulator)
    assert state.am.read(1, 0) == expected
    assert state.am.read(2, 0) == expected


def test_stream_underrun(ctx_small):
    with pytest.raises(StreamUnderrunError):
        run_text(ctx_small, "seed -> man ext -> mem[1]\nhalt")


def test_bundle_threshold_in_microcode(ctx_small):
    text = """
    zero -> bndrst
    seed -> bundle
    seed -> bundle
    zero -> bundle
    threshold -> mem[3]
    halt
    """
    _, state, _ = run_text(ctx_small, text)
    assert state.am.read(3, 0) == ctx_small.seed_vector


def test_hardware_loop_counts_iterations(ctx_small):
    text = """
    zero -> bndrst
    hw.loop0 4, end
        mix_ext 7, seed
        enc_reg -> bundle
    end:
    halt
    """
    _, state, report = run_text(ctx_small, text, samples=[1, 2, 3, 4])
    assert report.cycles == 1 + 1 + 4 * (9 + 1)
    assert state.loop_stack == []


def test_nested_loops_sharing_end(ctx_small):
    text = """
    hw.loop0 3, end
        hw.loop1 5, end
            nop
    end:
    halt
    """
    _, _, report = run_text(ctx_small, text)
    assert report.retired == 1 + 3 * (1 + 5) + 1


def test_empty_loop_body_costs_setup_only(ctx_small):
    text = "hw.loop0 10, end\nend:\nnop\nhalt"
    _, state, report = run_text(ctx_small, text)
    assert report.status is RunStatus.HALTED
    assert report.cycles == 2
    assert report.retired == 3
    assert not state.loop_stack


def test_am_search_cost_scales_with_fold(ctx_small, ctx_folded):
    _, state, report = run_text(ctx_small, "am_search 3\nhalt")
    assert report.cycles == 5
    assert state.last_search is not None
    _, _, folded = run_text(ctx_folded, "am_search 3\nhalt")
    assert folded.cycles == 10


def test_interrupt_auto_ack(ctx_small):
    _, state, report = run_text(ctx_small, "am_search 2\nintr 4095, 63\nhalt")
    assert len(report.interrupts) == 1
    assert report.interrupts[0].cycle == 4 + 1
    assert state.pending_interrupt is None


def test_interrupt_not_raised_without_search(ctx_small):
    _, _, report = run_text(ctx_small, "intr 4095, 63\nhalt")
    assert report.interrupts == []


def test_interrupt_block_policy(ctx_small):
    vm, state, report = run_text(ctx_small, "am_search 2\nintr 4095, 63\nhalt", policy=InterruptPolicy.BLOCK)
    assert report.status is RunStatus.BLOCKED
    with pytest.raises(InterruptPendingError):
        vm.step(state)
    event = vm.ack_interrupt(state)
    assert event.index == 0
    with pytest.raises(NoPendingInterruptError):
        vm.ack_interrupt(state)
    assert vm.run(state).status is RunStatus.HALTED


def test_cycle_limit(ctx_small):
    text = "hw.loop0 1000, end\nnop\nend:\nhalt"
    vm, state, report = run_text(ctx_small, text, limit=50)
    assert report.status is RunStatus.CYCLE_LIMIT
    assert report.cycles == 50
    assert not state.halted


def test_step_after_halt(ctx_small):
    vm, state, _ = run_text(ctx_small, "halt")
    with pytest.raises(InvalidPcError):
        vm.step(state)


def test_host_write_below_search_slot(ctx_small):
    vm = VirtualMachine(ctx_small)
    state = vm.new_state(assemble("halt"))
    v = random_vector(512, 2)
    vm.host_write(state, 6, 0, v)
    assert state.am.read(6, 0) == v
    with pytest.raises(HostWriteError):
        vm.host_write(state, 7, 0, v)


def test_load_prototypes_leaves_search_slot(ctx_small):
    image = AssociativeMemory(ctx_small.geometry)
    for row in range(8):
        image.write_row(row, random_vector(512, row))
    vm = VirtualMachine(ctx_small)
    state = vm.new_state(assemble("halt"))
    vm.load_prototypes(state, image)
    assert state.am.read(3, 0) == image.read(3, 0)
    assert state.am.read(7, 0) == HyperVector.zeros(512)


def test_part_counter_selects_subpart(ctx_folded):
    text = """
    part.clear
    seed -> mem[1]
    part.inc
    zero -> mem[1]
    part.inc
    halt
    """
    _, state, _ = run_text(ctx_folded, text)
    assert state.part_counter == 0
    assert state.am.read(1, 0) == ctx_folded.seed_vector
    assert state.am.read(1, 1) == HyperVector.zeros(512)


def test_evict_and_load_counter_planes(ctx_small):
    text = """
    zero -> bndrst
    seed -> bundle
    evict 4, mem[1]
    evict 0, mem[2]
    zero -> bndrst
    load mem[1], 4
    load mem[2], 0
    threshold -> mem[3]
    halt
    """
    _, state, _ = run_text(ctx_small, text)
    assert state.am.read(3, 0) == ctx_small.seed_vector


def test_trace_rows_match_retired(ctx_small, tmp_path):
    tracer = TraceRecorder()
    text = "hw.loop0 3, end\nmix_imm 1, 1\nend:\nam_search 1\nhalt"
    _, _, report = run_text(ctx_small, text, tracer=tracer)
    frame = tracer.to_frame()
    assert list(frame.columns) == TRACE_COLUMNS
    assert len(frame) == report.retired
    assert frame["cycle"].iloc[-1] == report.cycles
    path = tmp_path / "trace.csv"
    tracer.write_csv(path)
    assert path.read_text().splitlines()[0] == "cycle,pc,mnemonic,part_counter"


def test_runs_are_deterministic(ctx_small, constants, tmp_path):
    window = np.random.default_rng(3).integers(0, 128, size=(5, 64))
    program = build_application_program(Application.EMG, ctx_small.geometry, classes=3)
    image = AssociativeMemory(ctx_small.geometry)
    for row in range(3):
        image.write_row(row, random_vector(512, 40 + row))

    outputs = []
    for attempt in range(2):
        # contexto nuevo en cada pasada: nada se reutiliza de la anterior
        ctx = EncoderContext(ctx_small.geometry, constants)
        tracer = TraceRecorder()
        vm = VirtualMachine(ctx, InterruptPolicy.AUTO_ACK, tracer)
        state = vm.new_state(program)
        vm.load_prototypes(state, image)
        report = vm.run(state, InputStream(emg.window_stream([window])))
        path = tmp_path / f"trace{attempt}.csv"
        tracer.write_csv(path)
        outputs.append((path.read_bytes(), report.cycles, report.last_search, state.am))

    first, second = outputs
    assert first[0] == second[0]
    assert first[1:] == second[1:]


def test_input_stream_rejects_wide_samples():
    with pytest.raises(OperandRangeError):
        InputStream([128])
    assert InputStream.from_bytes(b"\x80\x05").samples == (0, 5)
