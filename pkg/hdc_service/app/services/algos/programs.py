"""Generadores de microcodigo para LANG, EMG y BEARING.

Mapa de filas de AM (prototipos abajo, busqueda en la ultima fila):

  LANG     prototipos 0..C-1, FIFO C..C+n-1, fila de busqueda = estado del n-grama
  EMG      prototipos 0..4, etiqueta de canal en la fila 5, fila de busqueda = 5-grama
  BEARING  fila 0 = complemento de V_M*, fila de busqueda = V_M

Con K > 1 el cuerpo se envuelve en un bucle de partes y el flujo de
entrada se consume K veces.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

from app.core.errors import GeometryError, InsufficientDataError
from app.models.hypervector import Geometry
from app.models.instruction import Program
from app.schemas.run_config import Application
from app.services.algos.bearing import (
    BEARING_WINDOW_SAMPLES,
    BEARING_WINDOWS,
    QUANT_BITS,
    alarm_sim_threshold,
    min_alarm_distance,
)
from app.services.algos.emg import EMG_CHANNELS, EMG_GESTURES, EMG_SAMPLES
from app.services.algos.lang import DEFAULT_NGRAM, SYMBOL_BITS
from app.services.assembler import assemble

logger = logging.getLogger(__name__)

LANG_LANGUAGES = 21
LANG_SENTENCE_LENGTH = 100
LANG_INTERRUPT = (400, 2)
EMG_INTERRUPT = (512, 0)


@dataclass(frozen=True)
class ProgramLayout:
    app: Application
    classes: int
    scratch_rows: tuple[int, ...]
    search_row: int

    @property
    def prototype_rows(self) -> range:
        return range(self.classes)

    @property
    def vector_slots(self) -> int:
        """Filas de trabajo ademas de los prototipos (la de busqueda incluida)."""
        return len(self.scratch_rows) + 1


def program_layout(
    app: Union[Application, str],
    geometry: Geometry,
    classes: Optional[int] = None,
    ngram: int = DEFAULT_NGRAM,
) -> ProgramLayout:
    app = Application(app)
    search = geometry.search_slot
    if app is Application.LANG:
        classes = LANG_LANGUAGES if classes is None else classes
        scratch = tuple(range(classes, classes + ngram))
    elif app is Application.EMG:
        classes = EMG_GESTURES if classes is None else classes
        scratch = (classes,)
    else:
        classes = 1
        scratch = ()
    if classes < 1:
        raise InsufficientDataError(f"{app.value} needs at least one class")
    if ngram < 1:
        raise InsufficientDataError(f"ngram must be >= 1, got {ngram}")
    if classes + len(scratch) > search:
        raise GeometryError(
            f"{app.value} needs {classes + len(scratch) + 1} AM rows, geometry has {geometry.am_rows}"
        )
    return ProgramLayout(app=app, classes=classes, scratch_rows=scratch, search_row=search)


class _Listing:
    def __init__(self, title: str):
        self.lines = [f"# {title}"]
        self.depth = 0

    def emit(self, text: str) -> None:
        self.lines.append("    " * (self.depth + 1) + text)

    def label(self, name: str) -> None:
        self.lines.append(f"{name}:")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _lang_body(out: _Listing, layout: ProgramLayout, ngram: int) -> None:
    fifo = layout.scratch_rows
    r = layout.search_row
    out.emit(f"mem[{fifo[-1]}] -> xor -> mem[{r}]")
    for j in range(ngram - 1, 0, -1):
        out.emit(f"mem[{fifo[j - 1]}] -> mix -> mem[{fifo[j]}]")
    out.emit(f"mix_ext {SYMBOL_BITS}, seed")
    out.emit(f"enc_reg -> mem[{fifo[0]}]")
    out.emit(f"mem[{r}] -> mix -> xor -> bundle")


def _lang_program(geometry: Geometry, layout: ProgramLayout, length: int, ngram: int, interrupt) -> str:
    r = layout.search_row
    out = _Listing(f"LANG: {ngram}-gramas, {layout.classes} idiomas, {length} simbolos por frase")
    folded = geometry.k > 1
    if folded:
        out.emit("part.clear")
        out.emit(f"hw.loop0 {geometry.k}, parts_end")
        out.depth += 1
    out.emit("zero -> bndrst")
    out.emit(f"hw.loop{out.depth} {length}, sentence_end")
    out.depth += 1
    _lang_body(out, layout, ngram)
    out.depth -= 1
    out.label("sentence_end")
    out.emit(f"threshold -> mem[{r}]")
    if folded:
        out.emit("part.inc")
        out.depth -= 1
        out.label("parts_end")
    out.emit(f"am_search {layout.classes}")
    out.emit(f"intr {interrupt[0]}, {interrupt[1]}")
    out.emit("halt")
    return out.text()


def _emg_program(geometry: Geometry, layout: ProgramLayout, interrupt) -> str:
    label_row = layout.scratch_rows[0]
    r = layout.search_row
    out = _Listing(f"EMG: {EMG_CHANNELS} canales, 5-grama de {EMG_SAMPLES} muestras, {layout.classes} gestos")
    folded = geometry.k > 1
    if folded:
        out.emit("part.clear")
        out.emit(f"hw.loop0 {geometry.k}, parts_end")
        out.depth += 1
    out.emit(f"zero -> mem[{r}]")
    out.emit(f"hw.loop{out.depth} {EMG_SAMPLES}, window_end")
    out.depth += 1
    if folded:
        out.emit("mix_imm 0, 0, seed")
        out.emit(f"enc_reg -> bndrst -> mem[{label_row}]")
    else:
        out.emit(f"seed -> bndrst -> mem[{label_row}]")
    out.emit(f"hw.loop{out.depth} {EMG_CHANNELS}, sample_end")
    out.depth += 1
    out.emit("seed -> man ext -> xor -> bundle")
    out.emit(f"mem[{label_row}] -> mix -> mem[{label_row}]")
    out.depth -= 1
    out.label("sample_end")
    out.emit("threshold -> enc_reg")
    out.emit(f"mem[{r}] -> mix -> xor -> mem[{r}]")
    out.depth -= 1
    out.label("window_end")
    if folded:
        out.emit("part.inc")
        out.depth -= 1
        out.label("parts_end")
    out.emit(f"am_search {layout.classes}")
    out.emit(f"intr {interrupt[0]}, {interrupt[1]}")
    out.emit("halt")
    return out.text()


def _bearing_program(geometry: Geometry, layout: ProgramLayout, alarm_distance: float) -> str:
    r = layout.search_row
    out = _Listing(f"BEARING: {BEARING_WINDOWS} ventanas de {BEARING_WINDOW_SAMPLES} muestras, alarma en {alarm_distance:g}")
    folded = geometry.k > 1
    if folded:
        out.emit("part.clear")
        out.emit(f"hw.loop0 {geometry.k}, parts_end")
        out.depth += 1
    out.emit("zero -> bndrst")
    out.emit(f"hw.loop{out.depth} {BEARING_WINDOWS}, measurement_end")
    out.depth += 1
    out.emit(f"hw.loop{out.depth} {BEARING_WINDOW_SAMPLES}, measurement_end")
    out.depth += 1
    out.emit(f"mix_ext {QUANT_BITS}, seed")
    out.emit("enc_reg -> bundle")
    out.depth -= 2
    out.label("measurement_end")
    out.emit(f"threshold -> mem[{r}]")
    if folded:
        out.emit("part.inc")
        out.depth -= 1
        out.label("parts_end")
    out.emit("am_search 1")
    out.emit(f"intr {alarm_sim_threshold(geometry.d, alarm_distance)}, 0")
    out.emit("halt")
    return out.text()


def generate_program(
    app: Union[Application, str],
    geometry: Geometry,
    classes: Optional[int] = None,
    ngram: int = DEFAULT_NGRAM,
    length: int = LANG_SENTENCE_LENGTH,
    interrupt: Optional[tuple[int, int]] = None,
    alarm_distance: Optional[float] = None,
) -> str:
    """Texto ensamblable del microcodigo de una aplicacion."""
    app = Application(app)
    layout = program_layout(app, geometry, classes, ngram)
    if app is Application.LANG:
        text = _lang_program(geometry, layout, length, ngram, interrupt or LANG_INTERRUPT)
    elif app is Application.EMG:
        text = _emg_program(geometry, layout, interrupt or EMG_INTERRUPT)
    else:
        if alarm_distance is None:
            alarm_distance = max(geometry.d // 4, min_alarm_distance(geometry.d))
        text = _bearing_program(geometry, layout, alarm_distance)
    logger.debug(f"[ASM] Generated {app.value} microcode for d={geometry.d} k={geometry.k}")
    return text


def build_application_program(app: Union[Application, str], geometry: Geometry, **options) -> Program:
    return assemble(generate_program(app, geometry, **options))
