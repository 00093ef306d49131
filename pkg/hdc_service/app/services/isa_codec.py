"""Codificacion binaria de la ISA de 26 bits y formato de fichero de programa.

Bit 25 separa NISC (0) de CISC (1). Los campos NISC se empaquetan en
[24:0] en el orden de la leyenda del formato; CISC lleva el opcode en
[24:21] y sus operandos debajo. Los bits no usados deben ser cero.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from app.core.errors import (
    DecodeError,
    FieldOverflowError,
    LoopNestingError,
    OperandRangeError,
    ProgramFormatError,
    UnknownOpcodeError,
)
from app.models.encoder import COUNTER_BITS, EncoderOp
from app.models.instruction import (
    MAX_LOOP_DEPTH,
    MAX_PROGRAM_WORDS,
    WORD_BITS,
    AmSearch,
    CiscOpcode,
    EvictPlane,
    Halt,
    InputSelect,
    Instruction,
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
    SourceLine,
)

logger = logging.getLogger(__name__)

CISC_FLAG = 1 << (WORD_BITS - 1)
PROGRAM_MAGIC = b"HDCP"
PROGRAM_VERSION = 1
_PROGRAM_HEADER = struct.Struct("<4sBH")


@dataclass(frozen=True)
class FieldSpec:
    """Campo de `hi - lo + 1` bits en las posiciones [hi:lo] de la palabra."""

    name: str
    hi: int
    lo: int

    @property
    def width(self) -> int:
        return self.hi - self.lo + 1

    @property
    def mask(self) -> int:
        return ((1 << self.width) - 1) << self.lo

    def insert(self, word: int, value: int) -> int:
        value = int(value)
        if not 0 <= value < (1 << self.width):
            raise FieldOverflowError(self.name, value, self.width)
        return word | (value << self.lo)

    def extract(self, word: int) -> int:
        return (word >> self.lo) & ((1 << self.width) - 1)


NISC_FIELDS = (
    FieldSpec("encsel", 24, 23),
    FieldSpec("smen", 22, 22),
    FieldSpec("smsel", 21, 21),
    FieldSpec("mxen", 20, 20),
    FieldSpec("mxinv", 19, 19),
    FieldSpec("mxsel", 18, 18),
    FieldSpec("op", 17, 15),
    FieldSpec("bnden", 14, 14),
    FieldSpec("bndrst", 13, 13),
    FieldSpec("wben", 12, 12),
    FieldSpec("ridx", 11, 6),
    FieldSpec("widx", 5, 0),
)
_NISC_FLAGS = ("smen", "smsel", "mxen", "mxinv", "mxsel", "bnden", "bndrst", "wben")

OPCODE_FIELD = FieldSpec("opcode", 24, 21)

CISC_LAYOUTS: dict[CiscOpcode, tuple[FieldSpec, ...]] = {
    CiscOpcode.HALT: (),
    CiscOpcode.AM_SEARCH: (FieldSpec("max_index", 5, 0),),
    CiscOpcode.MIX: (
        FieldSpec("source", 20, 19),
        FieldSpec("from_seed", 18, 18),
        FieldSpec("nbits", 17, 15),
        FieldSpec("value", 14, 8),
    ),
    CiscOpcode.INTR: (FieldSpec("sim_threshold", 17, 6), FieldSpec("index_threshold", 5, 0)),
    CiscOpcode.LOOP: (FieldSpec("iterations", 19, 10), FieldSpec("end_address", 9, 0)),
    CiscOpcode.JMP: (FieldSpec("target", 9, 0),),
    CiscOpcode.PART: (FieldSpec("action", 1, 0),),
    CiscOpcode.EVICT: (FieldSpec("plane", 8, 6), FieldSpec("widx", 5, 0)),
    CiscOpcode.LOAD: (FieldSpec("plane", 8, 6), FieldSpec("ridx", 5, 0)),
}

CISC_TYPES = {
    CiscOpcode.HALT: Halt,
    CiscOpcode.AM_SEARCH: AmSearch,
    CiscOpcode.MIX: Mix,
    CiscOpcode.INTR: Intr,
    CiscOpcode.LOOP: LoopStart,
    CiscOpcode.JMP: Jmp,
    CiscOpcode.PART: PartCounter,
    CiscOpcode.EVICT: EvictPlane,
    CiscOpcode.LOAD: LoadPlane,
}
_OPCODE_OF = {cls: opcode for opcode, cls in CISC_TYPES.items()}


def _check_operands(instr: Instruction, error=OperandRangeError) -> None:
    """Reglas de operandos mas alla del ancho de campo."""
    if isinstance(instr, Mix):
        source = MixSource(instr.source)
        if instr.nbits > 7:
            raise error(f"mix nbits {instr.nbits} exceeds 7")
        if source is MixSource.IMMEDIATE:
            if not 0 <= instr.value < (1 << instr.nbits):
                raise error(f"mix immediate {instr.value} does not fit in {instr.nbits} bits")
        elif instr.value != 0:
            raise error(f"mix with {source.name.lower()} operand must carry value 0")
    elif isinstance(instr, (EvictPlane, LoadPlane)):
        if not 0 <= instr.plane < COUNTER_BITS:
            raise error(f"counter plane {instr.plane} outside [0, {COUNTER_BITS - 1}]")


def encode(instr: Instruction) -> int:
    if isinstance(instr, NiscInstruction):
        try:
            EncoderOp(instr.op)
            InputSelect(instr.encsel)
        except ValueError:
            raise UnknownOpcodeError(f"invalid NISC op/encsel in {instr!r}")
        word = 0
        for spec in NISC_FIELDS:
            word = spec.insert(word, int(getattr(instr, spec.name)))
        return word
    opcode = _OPCODE_OF.get(type(instr))
    if opcode is None:
        raise UnknownOpcodeError(f"not an instruction: {instr!r}")
    if isinstance(instr, Mix):
        try:
            MixSource(instr.source)
        except ValueError:
            raise UnknownOpcodeError(f"invalid mix operand source {instr.source!r}")
    if isinstance(instr, PartCounter):
        try:
            PartAction(instr.action)
        except ValueError:
            raise UnknownOpcodeError(f"invalid part counter action {instr.action!r}")
    _check_operands(instr)
    word = OPCODE_FIELD.insert(CISC_FLAG, int(opcode))
    for spec in CISC_LAYOUTS[opcode]:
        word = spec.insert(word, int(getattr(instr, spec.name)))
    return word


def decode(word: int) -> Instruction:
    if not 0 <= word < (1 << WORD_BITS):
        raise DecodeError(f"word {word:#x} does not fit in {WORD_BITS} bits")
    if not word & CISC_FLAG:
        values = {spec.name: spec.extract(word) for spec in NISC_FIELDS}
        try:
            values["op"] = EncoderOp(values["op"])
        except ValueError:
            raise DecodeError(f"word {word:#09x}: reserved encoder op {values['op']:#05b}")
        values["encsel"] = InputSelect(values["encsel"])
        for name in _NISC_FLAGS:
            values[name] = bool(values[name])
        return NiscInstruction(**values)

    raw_opcode = OPCODE_FIELD.extract(word)
    try:
        opcode = CiscOpcode(raw_opcode)
    except ValueError:
        raise DecodeError(f"word {word:#09x}: reserved CISC opcode {raw_opcode}")
    layout = CISC_LAYOUTS[opcode]
    used = CISC_FLAG | OPCODE_FIELD.mask
    for spec in layout:
        used |= spec.mask
    if word & ~used:
        raise DecodeError(f"word {word:#09x}: nonzero unused bits for {opcode.name}")
    values = {spec.name: spec.extract(word) for spec in layout}
    try:
        if opcode is CiscOpcode.MIX:
            values["source"] = MixSource(values["source"])
            values["from_seed"] = bool(values["from_seed"])
        elif opcode is CiscOpcode.PART:
            values["action"] = PartAction(values["action"])
    except ValueError as exc:
        raise DecodeError(f"word {word:#09x}: {exc}")
    instr = CISC_TYPES[opcode](**values)
    _check_operands(instr, error=DecodeError)
    return instr


def check_loop_structure(instructions: Sequence[Instruction], source_map: Sequence[Optional[SourceLine]] = ()) -> None:
    """Valida anidamiento estatico: rangos [inicio, fin) sin cruces y profundidad <= 3."""

    def line_of(addr: int) -> Optional[int]:
        if addr < len(source_map) and source_map[addr] is not None:
            return source_map[addr].line
        return None

    size = len(instructions)
    ranges = []
    for addr, instr in enumerate(instructions):
        if isinstance(instr, LoopStart):
            if not addr < instr.end_address <= size:
                raise LoopNestingError(
                    line_of(addr), f"loop end address {instr.end_address} must lie in ({addr}, {size}]"
                )
            ranges.append((addr, instr.end_address))
        elif isinstance(instr, Jmp) and instr.target >= size:
            raise LoopNestingError(line_of(addr), f"jump target {instr.target} outside program of {size} words")

    for i, (start_a, end_a) in enumerate(ranges):
        depth = 1
        for j, (start_b, end_b) in enumerate(ranges):
            if i == j:
                continue
            if start_b < start_a < end_b:
                if end_a > end_b:
                    raise LoopNestingError(line_of(start_a), f"loop at {start_a} crosses the loop at {start_b}")
                depth += 1
        if depth > MAX_LOOP_DEPTH:
            raise LoopNestingError(
                line_of(start_a), f"loop nesting depth {depth} exceeds the {MAX_LOOP_DEPTH} hardware loops"
            )


def build_program(
    instructions: Sequence[Instruction],
    source_map: Sequence[Optional[SourceLine]] = (),
    labels: Optional[dict[str, int]] = None,
) -> Program:
    if len(instructions) > MAX_PROGRAM_WORDS:
        raise ProgramFormatError(f"program has {len(instructions)} words, limit is {MAX_PROGRAM_WORDS}")
    words = tuple(encode(instr) for instr in instructions)
    check_loop_structure(instructions, source_map)
    return Program(
        words=words,
        instructions=tuple(instructions),
        source_map=tuple(source_map),
        labels=dict(labels or {}),
    )


def program_from_words(words: Sequence[int]) -> Program:
    instructions = []
    for addr, word in enumerate(words):
        try:
            instructions.append(decode(word))
        except DecodeError as exc:
            raise DecodeError(f"address {addr}: {exc}")
    return build_program(instructions)


def write_program_binary(program: Program, path: Path) -> None:
    path = Path(path)
    header = _PROGRAM_HEADER.pack(PROGRAM_MAGIC, PROGRAM_VERSION, len(program.words))
    body = struct.pack(f"<{len(program.words)}I", *program.words)
    path.write_bytes(header + body)
    logger.info(f"[ASM] Wrote {len(program.words)} words to {path}")


def read_program_binary(path: Path) -> Program:
    path = Path(path)
    if not path.exists():
        raise ProgramFormatError(f"{path}: file not found")
    data = path.read_bytes()
    if len(data) < _PROGRAM_HEADER.size:
        raise ProgramFormatError(f"{path}: truncated header")
    magic, version, count = _PROGRAM_HEADER.unpack_from(data)
    if magic != PROGRAM_MAGIC:
        raise ProgramFormatError(f"{path}: bad magic {magic!r}")
    if version != PROGRAM_VERSION:
        raise ProgramFormatError(f"{path}: unsupported version {version}")
    expected = _PROGRAM_HEADER.size + 4 * count
    if len(data) != expected:
        raise ProgramFormatError(f"{path}: expected {expected} bytes for {count} words, got {len(data)}")
    words = struct.unpack_from(f"<{count}I", data, _PROGRAM_HEADER.size)
    return program_from_words(words)
