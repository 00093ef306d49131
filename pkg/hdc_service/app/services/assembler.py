"""Ensamblador y desensamblador de microcodigo `.hdc`.

Sintaxis: una instruccion por linea, comentarios con `#`, etiquetas
`nombre:`. Las instrucciones NISC se escriben como cadenas de datapath
(`mem[12] -> mix -> mem[11]`) o en forma cruda (`nisc op=xor ridx=3`).
"""
import logging
import re
from app.core.errors import (
    AssemblyError,
    EmptyProgramError,
    FieldOverflowError,
    OperandRangeError,
    UndefinedLabelError,
    UnknownOpcodeError,
)
from app.models.encoder import EncoderOp
from app.models.instruction import (
    AmSearch,
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
from app.services.isa_codec import NISC_FIELDS, build_program, encode

logger = logging.getLogger(__name__)

ARROW = re.compile(r"\s*(?:->|→)\s*")
LABEL_DEF = re.compile(r"^([A-Za-z_][\w.]*)\s*:\s*(.*)$")
LABEL_NAME = re.compile(r"^[A-Za-z_][\w.]*$")
MEM_REF = re.compile(r"^mem\[\s*([^\]]+?)\s*\]$")
LOOP_MNEMONIC = re.compile(r"^hw\.loop[0-2]?$")

NOP = NiscInstruction(encsel=InputSelect.ENC_REG)

SOURCES = {"zero": InputSelect.ZERO, "seed": InputSelect.SEED, "enc_reg": InputSelect.ENC_REG}
ENCSEL_NAMES = {**SOURCES, "am": InputSelect.AM}
THRESHOLD_SOURCES = ("threshold", "threshold_bndl_cntrs")
MIX_STAGES = {
    "mix": (0, False),
    "mix0": (0, False),
    "mix1": (1, False),
    "mix_inv": (0, True),
    "mix0_inv": (0, True),
    "mix1_inv": (1, True),
}
MANIPULATOR_STAGES = {"man": 0, "man ext": 0, "man latched": 1}
OPS = {
    "xor": EncoderOp.XOR,
    "bind": EncoderOp.XOR,
    "bind_with_enc_reg": EncoderOp.XOR,
    "and": EncoderOp.AND,
    "or": EncoderOp.OR,
    "not": EncoderOp.NOT_A,
    "pass_b": EncoderOp.PASS_B,
}
MIX_MNEMONICS = {
    "mix_imm": MixSource.IMMEDIATE,
    "mix_pc": MixSource.PART_COUNTER,
    "mix_ext": MixSource.EXTERNAL,
    "mix_latched": MixSource.LATCHED,
}
PART_MNEMONICS = {f"part.{action.name.lower()}": action for action in PartAction}


def parse_number(token: str, line: int) -> int:
    try:
        value = int(token.strip(), 0)
    except ValueError:
        raise AssemblyError(line, f"expected a number, got {token.strip()!r}")
    if value < 0:
        raise AssemblyError(line, f"negative operand {value}")
    return value


def _split_operands(rest: str) -> list[str]:
    rest = rest.strip()
    return [part.strip() for part in rest.split(",")] if rest else []


class _Assembler:
    def __init__(self, text: str):
        self.text = text
        self.labels: dict[str, int] = {}
        self.pending: list[tuple[int, str]] = []

    def collect(self) -> None:
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            while line:
                match = LABEL_DEF.match(line)
                if not match or ARROW.search(match.group(1)):
                    break
                name = match.group(1)
                if name in self.labels:
                    raise AssemblyError(lineno, f"duplicate label {name!r}")
                self.labels[name] = len(self.pending)
                line = match.group(2).strip()
            if line:
                self.pending.append((lineno, line))

    def resolve(self, token: str, line: int) -> int:
        token = token.strip()
        if LABEL_NAME.match(token):
            if token not in self.labels:
                raise UndefinedLabelError(line, f"undefined label {token!r}")
            return self.labels[token]
        return parse_number(token, line)

    def mem_index(self, token: str, line: int) -> int:
        match = MEM_REF.match(token.strip())
        if not match:
            raise AssemblyError(line, f"expected mem[N], got {token.strip()!r}")
        return parse_number(match.group(1), line)

    def expect(self, operands: list[str], counts: tuple[int, ...], mnemonic: str, line: int) -> None:
        if len(operands) not in counts:
            wanted = " or ".join(str(c) for c in counts)
            raise AssemblyError(line, f"{mnemonic} takes {wanted} operand(s), got {len(operands)}")

    def parse(self, line: int, text: str) -> Instruction:
        if ARROW.search(text):
            return self.parse_chain(line, text)
        mnemonic, rest = (text.split(None, 1) + [""])[:2]
        mnemonic = mnemonic.lower()
        operands = _split_operands(rest)

        if mnemonic == "halt":
            self.expect(operands, (0,), mnemonic, line)
            return Halt()
        if mnemonic == "nop":
            self.expect(operands, (0,), mnemonic, line)
            return NOP
        if mnemonic == "nisc":
            return self.parse_raw_nisc(line, rest)
        if mnemonic == "am_search":
            self.expect(operands, (1,), mnemonic, line)
            return AmSearch(max_index=parse_number(operands[0], line))
        if mnemonic in MIX_MNEMONICS:
            source = MIX_MNEMONICS[mnemonic]
            if source is MixSource.IMMEDIATE:
                self.expect(operands, (2, 3), mnemonic, line)
                value, nbits, flags = parse_number(operands[0], line), parse_number(operands[1], line), operands[2:]
            else:
                self.expect(operands, (1, 2), mnemonic, line)
                value, nbits, flags = 0, parse_number(operands[0], line), operands[1:]
            if flags and flags[0].lower() != "seed":
                raise AssemblyError(line, f"unknown mix flag {flags[0]!r} (expected 'seed')")
            return Mix(source=source, value=value, nbits=nbits, from_seed=bool(flags))
        if mnemonic == "intr":
            self.expect(operands, (2,), mnemonic, line)
            return Intr(sim_threshold=parse_number(operands[0], line), index_threshold=parse_number(operands[1], line))
        if LOOP_MNEMONIC.match(mnemonic):
            self.expect(operands, (2,), mnemonic, line)
            return LoopStart(iterations=parse_number(operands[0], line), end_address=self.resolve(operands[1], line))
        if mnemonic == "jmp":
            self.expect(operands, (1,), mnemonic, line)
            return Jmp(target=self.resolve(operands[0], line))
        if mnemonic in PART_MNEMONICS:
            self.expect(operands, (0,), mnemonic, line)
            return PartCounter(action=PART_MNEMONICS[mnemonic])
        if mnemonic == "evict":
            self.expect(operands, (2,), mnemonic, line)
            return EvictPlane(plane=parse_number(operands[0], line), widx=self.mem_index(operands[1], line))
        if mnemonic == "load":
            self.expect(operands, (2,), mnemonic, line)
            return LoadPlane(plane=parse_number(operands[1], line), ridx=self.mem_index(operands[0], line))
        raise AssemblyError(line, f"unknown mnemonic {mnemonic!r}")

    def parse_raw_nisc(self, line: int, rest: str) -> NiscInstruction:
        names = {spec.name for spec in NISC_FIELDS}
        values: dict[str, object] = {}
        for item in rest.split():
            key, sep, value = item.partition("=")
            key = key.lower()
            if not sep or key not in names:
                raise AssemblyError(line, f"bad nisc field {item!r}")
            if key == "encsel" and value.lower() in ENCSEL_NAMES:
                values[key] = ENCSEL_NAMES[value.lower()]
            elif key == "op" and value.upper() in EncoderOp.__members__:
                values[key] = EncoderOp[value.upper()]
            else:
                values[key] = parse_number(value, line)
        try:
            if "encsel" in values:
                values["encsel"] = InputSelect(values["encsel"])
            if "op" in values:
                values["op"] = EncoderOp(values["op"])
        except ValueError as exc:
            raise AssemblyError(line, str(exc))
        for flag in ("smen", "smsel", "mxen", "mxinv", "mxsel", "bnden", "bndrst", "wben"):
            if flag in values:
                if values[flag] not in (0, 1):
                    raise AssemblyError(line, f"nisc flag {flag} must be 0 or 1")
                values[flag] = bool(values[flag])
        return NiscInstruction(**values)

    def parse_chain(self, line: int, text: str) -> NiscInstruction:
        tokens = [re.sub(r"\s+", " ", tok.strip().lower()) for tok in ARROW.split(text.strip())]
        if any(not tok for tok in tokens):
            raise AssemblyError(line, "empty stage in datapath chain")
        fields: dict[str, object] = {}
        head, stages = tokens[0], tokens[1:]
        threshold = head in THRESHOLD_SOURCES
        if threshold:
            fields["op"] = EncoderOp.THRESH
        elif head in SOURCES:
            fields["encsel"] = SOURCES[head]
        elif MEM_REF.match(head):
            fields["encsel"] = InputSelect.AM
            fields["ridx"] = self.mem_index(head, line)
        else:
            raise AssemblyError(line, f"unknown datapath source {head!r}")

        # orden del datapath: manipulador, mezclador, operacion, sumideros
        phase = 0
        for position, token in enumerate(stages):
            last = position == len(stages) - 1
            if token in MANIPULATOR_STAGES and phase < 1 and not threshold:
                fields.update(smen=True, smsel=bool(MANIPULATOR_STAGES[token]))
                phase = 1
            elif token in MIX_STAGES and phase < 2 and not threshold:
                select, invert = MIX_STAGES[token]
                fields.update(mxen=True, mxsel=bool(select), mxinv=invert)
                phase = 2
            elif token in OPS and phase < 3 and not threshold:
                fields["op"] = OPS[token]
                phase = 3
            elif token == "bundle" and not fields.get("bnden"):
                fields["bnden"] = True
                phase = 4
            elif token in ("bndrst", "reset") and not fields.get("bndrst"):
                fields["bndrst"] = True
                phase = 4
            elif MEM_REF.match(token) and not fields.get("wben"):
                fields.update(wben=True, widx=self.mem_index(token, line))
                phase = 4
            elif token == "enc_reg" and last:
                pass
            else:
                raise AssemblyError(line, f"unexpected stage {token!r} in datapath chain")
        return NiscInstruction(**fields)

    def run(self) -> Program:
        self.collect()
        if not self.pending:
            raise EmptyProgramError(None, "program contains no instructions")
        instructions: list[Instruction] = []
        source_map: list[SourceLine] = []
        for line, text in self.pending:
            instr = self.parse(line, text)
            try:
                encode(instr)
            except (FieldOverflowError, OperandRangeError, UnknownOpcodeError) as exc:
                raise AssemblyError(line, str(exc)) from exc
            instructions.append(instr)
            source_map.append(SourceLine(line=line, text=text))
        return build_program(instructions, source_map, self.labels)


def assemble(text: str) -> Program:
    program = _Assembler(text).run()
    logger.debug(f"[ASM] Assembled {len(program)} words, {len(program.labels)} labels")
    return program


# --- desensamblado ---------------------------------------------------------

_SOURCE_NAMES = {InputSelect.ZERO: "zero", InputSelect.SEED: "seed", InputSelect.ENC_REG: "enc_reg"}
_OP_NAMES = {
    EncoderOp.XOR: "xor",
    EncoderOp.AND: "and",
    EncoderOp.OR: "or",
    EncoderOp.NOT_A: "not",
    EncoderOp.PASS_B: "pass_b",
}
_MIX_NAMES = {(0, False): "mix", (1, False): "mix1", (0, True): "mix_inv", (1, True): "mix1_inv"}


def format_raw_nisc(instr: NiscInstruction) -> str:
    fields = " ".join(f"{spec.name}={int(getattr(instr, spec.name))}" for spec in NISC_FIELDS)
    return f"nisc {fields}"


def format_nisc(instr: NiscInstruction) -> str:
    """Forma canonica en cadena; forma cruda si la palabra no tiene equivalente."""
    if instr == NOP:
        return "nop"
    if instr.op is EncoderOp.THRESH:
        if instr.encsel is not InputSelect.ZERO or instr.ridx or instr.smen or instr.smsel or instr.mxen \
                or instr.mxsel or instr.mxinv:
            return format_raw_nisc(instr)
        chain = ["threshold"]
    else:
        if instr.encsel is InputSelect.AM:
            chain = [f"mem[{instr.ridx}]"]
        elif instr.ridx:
            return format_raw_nisc(instr)
        else:
            chain = [_SOURCE_NAMES[instr.encsel]]
        if instr.smen:
            chain.append("man latched" if instr.smsel else "man ext")
        elif instr.smsel:
            return format_raw_nisc(instr)
        if instr.mxen:
            chain.append(_MIX_NAMES[(int(instr.mxsel), bool(instr.mxinv))])
        elif instr.mxsel or instr.mxinv:
            return format_raw_nisc(instr)
        if instr.op in _OP_NAMES:
            chain.append(_OP_NAMES[instr.op])
    if instr.bndrst:
        chain.append("bndrst")
    if instr.bnden:
        chain.append("bundle")
    if instr.wben:
        chain.append(f"mem[{instr.widx}]")
    elif instr.widx:
        return format_raw_nisc(instr)
    if not (instr.bndrst or instr.bnden or instr.wben):
        chain.append("enc_reg")
    return " -> ".join(chain)


def format_instruction(instr: Instruction, labels: dict[int, str], depth: int = 0) -> str:
    if isinstance(instr, NiscInstruction):
        return format_nisc(instr)
    if isinstance(instr, Halt):
        return "halt"
    if isinstance(instr, AmSearch):
        return f"am_search {instr.max_index}"
    if isinstance(instr, Mix):
        seed = ", seed" if instr.from_seed else ""
        if instr.source is MixSource.IMMEDIATE:
            return f"mix_imm {instr.value}, {instr.nbits}{seed}"
        name = {MixSource.PART_COUNTER: "mix_pc", MixSource.EXTERNAL: "mix_ext", MixSource.LATCHED: "mix_latched"}
        return f"{name[instr.source]} {instr.nbits}{seed}"
    if isinstance(instr, Intr):
        return f"intr {instr.sim_threshold}, {instr.index_threshold}"
    if isinstance(instr, LoopStart):
        return f"hw.loop{min(depth, 2)} {instr.iterations}, {labels.get(instr.end_address, instr.end_address)}"
    if isinstance(instr, Jmp):
        return f"jmp {labels.get(instr.target, instr.target)}"
    if isinstance(instr, PartCounter):
        return instr.mnemonic
    if isinstance(instr, EvictPlane):
        return f"evict {instr.plane}, mem[{instr.widx}]"
    if isinstance(instr, LoadPlane):
        return f"load mem[{instr.ridx}], {instr.plane}"
    raise UnknownOpcodeError(f"cannot format {instr!r}")


def disassemble(program: Program) -> str:
    targets = set()
    loops = []
    for addr, instr in enumerate(program.instructions):
        if isinstance(instr, LoopStart):
            targets.add(instr.end_address)
            loops.append((addr, instr.end_address))
        elif isinstance(instr, Jmp):
            targets.add(instr.target)
    labels = {addr: f"addr_{addr:03d}" for addr in sorted(targets)}

    lines = []
    for addr, instr in enumerate(program.instructions):
        if addr in labels:
            lines.append(f"{labels[addr]}:")
        depth = sum(1 for start, end in loops if start < addr < end)
        lines.append("    " * (depth + 1) + format_instruction(instr, labels, depth))
    if len(program.instructions) in labels:
        lines.append(f"{labels[len(program.instructions)]}:")
    return "\n".join(lines) + "\n"
