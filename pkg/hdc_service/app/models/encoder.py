"""Tipos del HD-Encoder: configuraciones cableadas y estado de contadores."""
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Optional

import numpy as np

from app.core.constants import SeedConstants
from app.core.errors import GeometryError, OperandRangeError, SeedRejectedError
from app.models.hypervector import (
    UNARY_WIDTH,
    HyperVector,
    Permutation,
    random_permutation,
    random_vector,
)

COUNTER_BITS = 5
COUNTER_MAX = (1 << COUNTER_BITS) - 1
COUNTER_RESET = 16


class EncoderOp(IntEnum):
    PASS_A = 0b000
    XOR = 0b001
    AND = 0b010
    OR = 0b011
    NOT_A = 0b100
    PASS_B = 0b101
    THRESH = 0b110


@dataclass(frozen=True)
class MixerConfig:
    pi0: Permutation
    pi1: Permutation
    pi0_inv: Permutation
    pi1_inv: Permutation
    seed_vector: HyperVector

    def __post_init__(self):
        widths = {self.pi0.width, self.pi1.width, self.pi0_inv.width, self.pi1_inv.width, self.seed_vector.width}
        if len(widths) != 1:
            raise GeometryError(f"mixer components disagree on width: {sorted(widths)}")
        if self.pi0.then(self.pi1) == self.pi1.then(self.pi0):
            raise SeedRejectedError("pi0 and pi1 commute; pick other seeds")
        if not self.pi0.then(self.pi0_inv).is_identity() or not self.pi1.then(self.pi1_inv).is_identity():
            raise SeedRejectedError("mixer inverse permutations do not invert their forward maps")

    @classmethod
    def build(cls, width: int, constants: SeedConstants) -> "MixerConfig":
        pi0 = random_permutation(width, constants.pi0)
        pi1 = random_permutation(width, constants.pi1)
        return cls(
            pi0=pi0,
            pi1=pi1,
            pi0_inv=pi0.inverse(),
            pi1_inv=pi1.inverse(),
            seed_vector=random_vector(width, constants.seed_vector),
        )

    @property
    def width(self) -> int:
        return self.pi0.width

    def select(self, select_bit: int, invert: bool = False) -> Permutation:
        if select_bit:
            return self.pi1_inv if invert else self.pi1
        return self.pi0_inv if invert else self.pi0


@dataclass(frozen=True)
class ManipulatorConfig:
    spread_perm: Permutation
    unary_width: int = UNARY_WIDTH

    def __post_init__(self):
        if self.unary_width != UNARY_WIDTH:
            raise GeometryError(f"unary width must be {UNARY_WIDTH}")
        if self.spread_perm.width % self.unary_width:
            raise GeometryError(f"width {self.spread_perm.width} is not a multiple of {UNARY_WIDTH}")

    @classmethod
    def build(cls, width: int, constants: SeedConstants) -> "ManipulatorConfig":
        return cls(spread_perm=random_permutation(width, constants.manipulator))

    @property
    def width(self) -> int:
        return self.spread_perm.width

    @property
    def spread_factor(self) -> int:
        return self.width // self.unary_width

    @cached_property
    def mask_table(self) -> np.ndarray:
        """Mascara de volteo para cada w en [0, 128): unario -> spread -> permutacion."""
        unary = np.arange(self.unary_width)[None, :] < np.arange(self.unary_width)[:, None]
        spread = np.repeat(unary, self.spread_factor, axis=1)
        table = spread[:, self.spread_perm.gather]
        table.setflags(write=False)
        return table

    def mask(self, w: int) -> np.ndarray:
        if not 0 <= w < self.unary_width:
            raise OperandRangeError(f"manipulator operand {w} outside [0, {self.unary_width - 1}]")
        return self.mask_table[w]


class BundleCounterBank:
    """Contadores saturantes bidireccionales de 5 bits, uno por bit del datapath."""

    __slots__ = ("counters",)

    def __init__(self, width: int, counters: Optional[np.ndarray] = None):
        if counters is None:
            counters = np.full(width, COUNTER_RESET, dtype=np.int16)
        counters = np.array(counters, dtype=np.int16, copy=True)
        if counters.shape != (width,):
            raise GeometryError(f"counter bank expects {width} counters, got {counters.shape}")
        if counters.min(initial=0) < 0 or counters.max(initial=0) > COUNTER_MAX:
            raise OperandRangeError(f"counter values must lie in [0, {COUNTER_MAX}]")
        self.counters = counters

    @property
    def width(self) -> int:
        return self.counters.size

    def reset(self) -> None:
        self.counters.fill(COUNTER_RESET)

    def accumulate_bits(self, bits: np.ndarray) -> None:
        self.counters += np.where(bits, 1, -1).astype(np.int16)
        np.clip(self.counters, 0, COUNTER_MAX, out=self.counters)

    def threshold_bits(self) -> np.ndarray:
        return self.counters >= COUNTER_RESET

    def plane_bits(self, plane: int) -> np.ndarray:
        return ((self.counters >> plane) & 1).astype(bool)

    def load_plane_bits(self, plane: int, bits: np.ndarray) -> None:
        cleared = self.counters & np.int16(~(1 << plane) & COUNTER_MAX)
        self.counters = (cleared | (np.asarray(bits, dtype=np.int16) << plane)).astype(np.int16)

    def copy(self) -> "BundleCounterBank":
        return BundleCounterBank(self.width, self.counters)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BundleCounterBank):
            return NotImplemented
        return np.array_equal(self.counters, other.counters)


class EncoderState:
    __slots__ = ("output_register", "counters")

    def __init__(self, output_register: HyperVector, counters: BundleCounterBank):
        if output_register.width != counters.width:
            raise GeometryError("output register and counter bank widths differ")
        self.output_register = output_register
        self.counters = counters

    @classmethod
    def fresh(cls, width: int) -> "EncoderState":
        return cls(HyperVector.zeros(width), BundleCounterBank(width))

    @property
    def width(self) -> int:
        return self.output_register.width

    def copy(self) -> "EncoderState":
        return EncoderState(self.output_register, self.counters.copy())
