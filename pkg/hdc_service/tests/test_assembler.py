from pathlib import Path

import pytest

from app.core.errors import AssemblyError, EmptyProgramError, LoopNestingError, UndefinedLabelError
from app.models.encoder import EncoderOp
from app.models.hypervector import Geometry
from app.models.instruction import AmSearch, InputSelect, Intr, LoopStart, Mix, MixSource, NiscInstruction
from app.schemas.run_config import Application
from app.services.algos.programs import generate_program
from app.services.assembler import assemble, disassemble, format_nisc

PROGRAMS = Path(__file__).resolve().parent.parent / "programs"


def test_datapath_chain():
    program = assemble("mem[3] -> man ext -> mix1_inv -> xor -> bundle -> mem[4]\nhalt\n")
    instr = program.instructions[0]
    assert instr == NiscInstruction(
        encsel=InputSelect.AM, ridx=3, smen=True, mxen=True, mxsel=True, mxinv=True,
        op=EncoderOp.XOR, bnden=True, wben=True, widx=4,
    )


def test_threshold_chain():
    instr = assemble("threshold -> mem[31]").instructions[0]
    assert instr.op is EncoderOp.THRESH
    assert instr.wben and instr.widx == 31


def test_cisc_mnemonics_and_labels():
    text = """
    # comentario
    hw.loop0 3, end
        mix_ext 5, seed
        mix_imm 2, 2
    end: am_search 4
    intr 0x190, 2
    halt
    """
    program = assemble(text)
    assert program.instructions[0] == LoopStart(iterations=3, end_address=3)
    assert program.instructions[1] == Mix(source=MixSource.EXTERNAL, value=0, nbits=5, from_seed=True)
    assert program.instructions[2] == Mix(source=MixSource.IMMEDIATE, value=2, nbits=2)
    assert program.instructions[3] == AmSearch(max_index=4)
    assert program.instructions[4] == Intr(sim_threshold=400, index_threshold=2)
    assert program.labels == {"end": 3}


def test_raw_nisc_form():
    instr = assemble("nisc encsel=seed op=xor bnden=1 widx=2").instructions[0]
    assert instr == NiscInstruction(encsel=InputSelect.SEED, op=EncoderOp.XOR, bnden=True, widx=2)


def test_unknown_mnemonic_reports_line():
    with pytest.raises(AssemblyError) as info:
        assemble("halt\n\nfrobnicate 3\n")
    assert info.value.line == 3


def test_undefined_label():
    with pytest.raises(UndefinedLabelError):
        assemble("hw.loop0 2, nowhere\nhalt\n")


def test_empty_program():
    with pytest.raises(EmptyProgramError):
        assemble("# nada\n\n")


def test_bad_chain_order():
    with pytest.raises(AssemblyError):
        assemble("seed -> xor -> mix")


def test_operand_overflow_reports_line():
    with pytest.raises(AssemblyError) as info:
        assemble("halt\nam_search 64\n")
    assert info.value.line == 2


def test_loop_nesting_reports_line():
    text = "hw.loop0 2, a\nhw.loop1 2, b\nnop\na:\nnop\nb:\nhalt\n"
    with pytest.raises(LoopNestingError) as info:
        assemble(text)
    assert info.value.line is not None


def test_format_nisc_canonical_forms():
    assert format_nisc(NiscInstruction(encsel=InputSelect.ENC_REG)) == "nop"
    assert format_nisc(NiscInstruction(encsel=InputSelect.SEED, bndrst=True, wben=True, widx=5)) == "seed -> bndrst -> mem[5]"
    assert format_nisc(NiscInstruction(encsel=InputSelect.ZERO, ridx=7)).startswith("nisc ")


@pytest.mark.parametrize("name", ["lang", "emg", "bearing"])
def test_shipped_programs_round_trip(name):
    program = assemble((PROGRAMS / f"{name}.hdc").read_text())
    again = assemble(disassemble(program))
    assert again.words == program.words


@pytest.mark.parametrize("name", ["lang", "emg", "bearing"])
def test_shipped_programs_match_generator(name):
    shipped = assemble((PROGRAMS / f"{name}.hdc").read_text())
    generated = assemble(generate_program(Application(name), Geometry()))
    assert shipped.words == generated.words


def test_disassembly_of_folded_program_round_trips():
    program = assemble(generate_program(Application.EMG, Geometry(d=2048, k=4)))
    assert assemble(disassemble(program)).words == program.words
