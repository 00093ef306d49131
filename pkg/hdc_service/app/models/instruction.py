"""Instrucciones de la ISA de 26 bits: NISC (campos de datapath) y variantes CISC."""
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional, Union

from app.models.encoder import EncoderOp

WORD_BITS = 26
MAX_PROGRAM_WORDS = 1024
MAX_LOOP_DEPTH = 3


class InputSelect(IntEnum):
    ZERO = 0b00
    SEED = 0b01
    AM = 0b10
    ENC_REG = 0b11


class MixSource(IntEnum):
    IMMEDIATE = 0
    PART_COUNTER = 1
    EXTERNAL = 2
    LATCHED = 3


class PartAction(IntEnum):
    CLEAR = 0
    INC = 1
    DEC = 2


class CiscOpcode(IntEnum):
    HALT = 0
    AM_SEARCH = 1
    MIX = 2
    INTR = 3
    LOOP = 4
    JMP = 5
    PART = 6
    EVICT = 7
    LOAD = 8


@dataclass(frozen=True)
class NiscInstruction:
    encsel: InputSelect = InputSelect.ZERO
    smen: bool = False
    smsel: bool = False
    mxen: bool = False
    mxinv: bool = False
    mxsel: bool = False
    op: EncoderOp = EncoderOp.PASS_A
    bnden: bool = False
    bndrst: bool = False
    wben: bool = False
    ridx: int = 0
    widx: int = 0

    mnemonic = "nisc"


@dataclass(frozen=True)
class Halt:
    mnemonic = "halt"


@dataclass(frozen=True)
class AmSearch:
    max_index: int

    mnemonic = "am_search"


@dataclass(frozen=True)
class Mix:
    source: MixSource
    value: int
    nbits: int
    from_seed: bool = False

    mnemonic = "mix"


@dataclass(frozen=True)
class Intr:
    sim_threshold: int
    index_threshold: int

    mnemonic = "intr"


@dataclass(frozen=True)
class LoopStart:
    iterations: int
    end_address: int

    mnemonic = "hw.loop"


@dataclass(frozen=True)
class Jmp:
    target: int

    mnemonic = "jmp"


@dataclass(frozen=True)
class PartCounter:
    action: PartAction

    @property
    def mnemonic(self) -> str:
        return f"part.{self.action.name.lower()}"


@dataclass(frozen=True)
class EvictPlane:
    plane: int
    widx: int

    mnemonic = "evict"


@dataclass(frozen=True)
class LoadPlane:
    plane: int
    ridx: int

    mnemonic = "load"


CiscInstruction = Union[Halt, AmSearch, Mix, Intr, LoopStart, Jmp, PartCounter, EvictPlane, LoadPlane]
Instruction = Union[NiscInstruction, CiscInstruction]


@dataclass(frozen=True)
class SourceLine:
    line: int
    text: str


@dataclass(frozen=True)
class Program:
    """Programa ensamblado: palabras, instrucciones decodificadas y mapa de fuente."""

    words: tuple[int, ...]
    instructions: tuple[Instruction, ...]
    source_map: tuple[Optional[SourceLine], ...] = ()
    labels: dict[str, int] = field(default_factory=dict, compare=False, hash=False)

    def __len__(self) -> int:
        return len(self.words)

    def source_of(self, pc: int) -> Optional[SourceLine]:
        if pc < len(self.source_map):
            return self.source_map[pc]
        return None
