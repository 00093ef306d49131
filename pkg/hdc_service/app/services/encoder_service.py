"""Operaciones del HD-Encoder: mezclador, manipulador, unidades y contadores."""
import logging
from typing import Optional, Union

import numpy as np

from app.core.constants import SeedConstants, load_seed_constants
from app.core.errors import OperandRangeError, UnknownOpcodeError, WidthMismatchError
from app.models.encoder import (
    COUNTER_BITS,
    EncoderOp,
    EncoderState,
    ManipulatorConfig,
    MixerConfig,
)
from app.models.hypervector import Geometry, HyperVector, Permutation, permute

logger = logging.getLogger(__name__)


def mix_step(v: HyperVector, select_bit: int, invert: bool, cfg: MixerConfig) -> HyperVector:
    return permute(v, cfg.select(select_bit, invert))


def _selector_chain(value: int, nbits: int, cfg: MixerConfig) -> Permutation:
    chain = Permutation.identity(cfg.width)
    for bit in range(nbits):
        chain = chain.then(cfg.select((value >> bit) & 1))
    return chain


def im_permutation(w: int, nbits: int, cfg: MixerConfig) -> Permutation:
    """Composicion de los nbits pasos de mezcla de im_map, LSB primero."""
    if nbits < 1:
        raise OperandRangeError(f"nbits must be >= 1, got {nbits}")
    if not 0 <= w < (1 << nbits):
        raise OperandRangeError(f"operand {w} does not fit in {nbits} bits")
    return _selector_chain(w, nbits, cfg)


def im_map(w: int, nbits: int, cfg: MixerConfig, start: HyperVector) -> HyperVector:
    return permute(start, im_permutation(w, nbits, cfg))


def channel_label_next(prev: HyperVector, cfg: MixerConfig) -> HyperVector:
    return permute(prev, cfg.pi0)


def part_permutation(h: int, cfg: MixerConfig, k: int = 1) -> Permutation:
    if not 0 <= h < k:
        raise OperandRangeError(f"part index {h} outside [0, {k})")
    return _selector_chain(h, (k - 1).bit_length(), cfg)


def manipulate(v: HyperVector, w: int, cfg: ManipulatorConfig) -> HyperVector:
    if v.width != cfg.width:
        raise WidthMismatchError(v.width, cfg.width)
    return HyperVector.from_bits(v.bits ^ cfg.mask(w))


def manipulate_uniform(v: HyperVector, w: int, cfg: MixerConfig, mcfg: ManipulatorConfig) -> HyperVector:
    """Variante multiciclo: la mascara se remezcla con im_map(w) antes del XOR."""
    mask = manipulate(HyperVector.zeros(mcfg.width), w, mcfg)
    return v ^ im_map(w, 7, cfg, mask)


def encoder_op(op: Union[EncoderOp, int], a: HyperVector, b: HyperVector) -> HyperVector:
    try:
        op = EncoderOp(op)
    except ValueError:
        raise UnknownOpcodeError(f"unknown encoder op {op!r}")
    if a.width != b.width:
        raise WidthMismatchError(a.width, b.width)
    if op is EncoderOp.PASS_A:
        return a
    if op is EncoderOp.XOR:
        return a ^ b
    if op is EncoderOp.AND:
        return a & b
    if op is EncoderOp.OR:
        return a | b
    if op is EncoderOp.NOT_A:
        return ~a
    if op is EncoderOp.PASS_B:
        return b
    # THRESH necesita el banco de contadores: ver bundle_threshold
    raise UnknownOpcodeError(f"encoder op {op.name} is not a bitwise unit operation")


def bundle_accumulate(state: EncoderState, v: HyperVector) -> EncoderState:
    if v.width != state.width:
        raise WidthMismatchError(v.width, state.width)
    state.counters.accumulate_bits(v.bits)
    return state


def bundle_threshold(state: EncoderState) -> HyperVector:
    return HyperVector.from_bits(state.counters.threshold_bits())


def _check_plane(plane: int) -> None:
    if not 0 <= plane < COUNTER_BITS:
        raise OperandRangeError(f"counter plane {plane} outside [0, {COUNTER_BITS - 1}]")


def counter_evict_plane(state: EncoderState, plane: int) -> HyperVector:
    _check_plane(plane)
    return HyperVector.from_bits(state.counters.plane_bits(plane))


def counter_load_plane(state: EncoderState, plane: int, v: HyperVector) -> EncoderState:
    _check_plane(plane)
    if v.width != state.width:
        raise WidthMismatchError(v.width, state.width)
    state.counters.load_plane_bits(plane, v.bits)
    return state


class EncoderContext:
    """Datapath cableado de una geometria: mezclador, manipulador y caches.

    Las tablas de vectores de item a dimension completa (las K partes
    concatenadas) alimentan a los codificadores de referencia.
    """

    def __init__(self, geometry: Geometry, constants: Optional[SeedConstants] = None):
        self.geometry = geometry
        self.constants = constants or load_seed_constants()
        self.mixer = MixerConfig.build(geometry.width, self.constants)
        self.manipulator = ManipulatorConfig.build(geometry.width, self.constants)
        self._im_cache: dict[tuple[int, int], Permutation] = {}
        self._part_cache: dict[int, Permutation] = {}
        self._table_cache: dict[int, np.ndarray] = {}
        logger.debug(
            f"[ENCODER] Datapath ready d={geometry.d} k={geometry.k} width={geometry.width} "
            f"seeds v{self.constants.version}"
        )

    @property
    def width(self) -> int:
        return self.geometry.width

    @property
    def seed_vector(self) -> HyperVector:
        return self.mixer.seed_vector

    def im_permutation(self, w: int, nbits: int) -> Permutation:
        key = (w, nbits)
        if key not in self._im_cache:
            self._im_cache[key] = im_permutation(w, nbits, self.mixer)
        return self._im_cache[key]

    def part_permutation(self, h: int) -> Permutation:
        if h not in self._part_cache:
            self._part_cache[h] = part_permutation(h, self.mixer, self.geometry.k)
        return self._part_cache[h]

    def mix_operand(self, start: HyperVector, w: int, nbits: int, h: int) -> HyperVector:
        """Resultado de una instruccion Mix: im_map seguido de la permutacion de la parte h."""
        v = start if nbits == 0 else permute(start, self.im_permutation(w, nbits))
        if self.geometry.k > 1:
            v = permute(v, self.part_permutation(h))
        return v

    def folded_gather(self, p: Permutation) -> np.ndarray:
        """Indices para aplicar p a cada parte de un vector de dimension completa."""
        width = self.geometry.width
        return np.concatenate([p.gather + h * width for h in range(self.geometry.k)])

    def item_table(self, nbits: int) -> np.ndarray:
        """Bits (2^nbits, D) de los vectores de item rematerializados por parte."""
        if nbits not in self._table_cache:
            seed = self.seed_vector
            rows = []
            for w in range(1 << nbits):
                item = permute(seed, self.im_permutation(w, nbits))
                rows.append(np.concatenate([
                    permute(item, self.part_permutation(h)).bits for h in range(self.geometry.k)
                ]))
            table = np.stack(rows)
            table.setflags(write=False)
            self._table_cache[nbits] = table
        return self._table_cache[nbits]

    def part_seed_bits(self) -> np.ndarray:
        """S permutado por parte (P_h S), concatenado a dimension completa."""
        return np.concatenate([
            permute(self.seed_vector, self.part_permutation(h)).bits for h in range(self.geometry.k)
        ])
