"""Nucleo de vectores binarios (BSC): geometria, hipervectores y permutaciones.

Los bits se guardan empaquetados en `uint8` con orden de bits "little"
(el bit i vive en el bit i % 8 del byte i // 8). Los bits de relleno del
ultimo byte siempre valen cero, asi XOR/popcount operan byte a byte.
"""
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from app.core.errors import GeometryError, InsufficientDataError, WidthMismatchError

UNARY_WIDTH = 128
MAX_AM_ROWS = 64
MAX_DIMENSION = 1 << 16


def _swar_popcount8(x: np.ndarray) -> np.ndarray:
    x = x - ((x >> 1) & 0x55)
    x = (x & 0x33) + ((x >> 2) & 0x33)
    return (x + (x >> 4)) & 0x0F


POPCOUNT8 = _swar_popcount8(np.arange(256, dtype=np.uint16)).astype(np.uint16)


@dataclass(frozen=True)
class Geometry:
    d: int = 2048
    k: int = 1
    am_rows: int = 32

    def __post_init__(self):
        for name in ("d", "k", "am_rows"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise GeometryError(f"{name} must be a positive integer, got {value!r}")
        if self.d % self.k:
            raise GeometryError(f"d={self.d} is not a multiple of k={self.k}")
        if self.width % UNARY_WIDTH:
            raise GeometryError(f"width d/k={self.width} is not a multiple of {UNARY_WIDTH}")
        if not 2 <= self.am_rows <= MAX_AM_ROWS:
            raise GeometryError(f"am_rows must be in [2, {MAX_AM_ROWS}], got {self.am_rows}")
        if self.d > MAX_DIMENSION:
            raise GeometryError(f"d={self.d} exceeds {MAX_DIMENSION}")

    @property
    def width(self) -> int:
        return self.d // self.k

    @property
    def search_slot(self) -> int:
        return self.am_rows - 1

    @property
    def part_bits(self) -> int:
        """Bits de seleccion de la permutacion por parte: ceil(log2 K)."""
        return (self.k - 1).bit_length()


class HyperVector:
    __slots__ = ("width", "_packed", "_bits")

    def __init__(self, packed: np.ndarray, width: int):
        nbytes = (width + 7) // 8
        packed = np.array(packed, dtype=np.uint8, copy=True).reshape(-1)
        if packed.size != nbytes:
            raise GeometryError(f"packed buffer has {packed.size} bytes, expected {nbytes}")
        tail = width % 8
        if tail:
            packed[-1] &= (1 << tail) - 1
        packed.setflags(write=False)
        self.width = int(width)
        self._packed = packed
        self._bits = None

    @classmethod
    def from_bits(cls, bits) -> "HyperVector":
        bits = np.asarray(bits, dtype=bool).reshape(-1)
        return cls(np.packbits(bits, bitorder="little"), bits.size)

    @classmethod
    def zeros(cls, width: int) -> "HyperVector":
        return cls(np.zeros((width + 7) // 8, dtype=np.uint8), width)

    @classmethod
    def ones(cls, width: int) -> "HyperVector":
        return cls(np.full((width + 7) // 8, 0xFF, dtype=np.uint8), width)

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    @property
    def bits(self) -> np.ndarray:
        if self._bits is None:
            bits = np.unpackbits(self._packed, count=self.width, bitorder="little").astype(bool)
            bits.setflags(write=False)
            self._bits = bits
        return self._bits

    def popcount(self) -> int:
        return int(POPCOUNT8[self._packed].sum())

    def _check(self, other: "HyperVector") -> None:
        if self.width != other.width:
            raise WidthMismatchError(self.width, other.width)

    def __xor__(self, other: "HyperVector") -> "HyperVector":
        self._check(other)
        return HyperVector(self._packed ^ other._packed, self.width)

    def __and__(self, other: "HyperVector") -> "HyperVector":
        self._check(other)
        return HyperVector(self._packed & other._packed, self.width)

    def __or__(self, other: "HyperVector") -> "HyperVector":
        self._check(other)
        return HyperVector(self._packed | other._packed, self.width)

    def __invert__(self) -> "HyperVector":
        return HyperVector(~self._packed, self.width)

    def __len__(self) -> int:
        return self.width

    def __eq__(self, other) -> bool:
        if not isinstance(other, HyperVector):
            return NotImplemented
        return self.width == other.width and np.array_equal(self._packed, other._packed)

    def __hash__(self) -> int:
        return hash((self.width, self._packed.tobytes()))

    def __repr__(self) -> str:
        return f"HyperVector(width={self.width}, popcount={self.popcount()})"

    def split(self, k: int) -> list["HyperVector"]:
        if self.width % k:
            raise GeometryError(f"cannot split width {self.width} into {k} parts")
        return [HyperVector.from_bits(part) for part in np.split(self.bits, k)]


class Permutation:
    """Biyeccion sobre posiciones de bit: permute(v)[map[i]] = v[i]."""

    __slots__ = ("map", "_gather")

    def __init__(self, mapping):
        mapping = np.array(mapping, dtype=np.int64, copy=True).reshape(-1)
        if not np.array_equal(np.sort(mapping), np.arange(mapping.size)):
            raise GeometryError("permutation map is not a bijection")
        gather = np.empty_like(mapping)
        gather[mapping] = np.arange(mapping.size)
        mapping.setflags(write=False)
        gather.setflags(write=False)
        self.map = mapping
        self._gather = gather

    @classmethod
    def identity(cls, width: int) -> "Permutation":
        return cls(np.arange(width))

    @property
    def width(self) -> int:
        return self.map.size

    @property
    def gather(self) -> np.ndarray:
        """Indices de lectura: out = bits[gather]."""
        return self._gather

    def inverse(self) -> "Permutation":
        return Permutation(self._gather)

    def then(self, other: "Permutation") -> "Permutation":
        """Composicion: aplica self y despues other."""
        if self.width != other.width:
            raise WidthMismatchError(self.width, other.width)
        return Permutation(other.map[self.map])

    def power(self, n: int) -> "Permutation":
        base = self if n >= 0 else self.inverse()
        result = Permutation.identity(self.width)
        for _ in range(abs(n)):
            result = result.then(base)
        return result

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.map, np.arange(self.width)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    def __hash__(self) -> int:
        return hash(self.map.tobytes())

    def __repr__(self) -> str:
        return f"Permutation(width={self.width})"


GeometryLike = Union[Geometry, int]


def _width_of(geometry: GeometryLike) -> int:
    return geometry.width if isinstance(geometry, Geometry) else int(geometry)


def random_vector(geometry: GeometryLike, seed: int) -> HyperVector:
    rng = np.random.default_rng(seed)
    return HyperVector.from_bits(rng.integers(0, 2, size=_width_of(geometry), dtype=np.uint8))


def random_permutation(geometry: GeometryLike, seed: int) -> Permutation:
    rng = np.random.default_rng(seed)
    return Permutation(rng.permutation(_width_of(geometry)))


def bind(a: HyperVector, b: HyperVector) -> HyperVector:
    return a ^ b


def permute(v: HyperVector, p: Permutation) -> HyperVector:
    if v.width != p.width:
        raise WidthMismatchError(v.width, p.width)
    return HyperVector.from_bits(v.bits[p.gather])


def complement(v: HyperVector) -> HyperVector:
    return ~v


def hamming(a: HyperVector, b: HyperVector) -> int:
    return (a ^ b).popcount()


def normalized_hamming(a: HyperVector, b: HyperVector) -> float:
    return hamming(a, b) / a.width


def concat(parts: Sequence[HyperVector]) -> HyperVector:
    if not parts:
        raise GeometryError("cannot concatenate zero parts")
    return HyperVector.from_bits(np.concatenate([p.bits for p in parts]))


def majority_bundle_reference(vs: Iterable[HyperVector], tie_seed: int = 0) -> HyperVector:
    """Mayoria por bit de precision arbitraria; empates por moneda sembrada."""
    vs = list(vs)
    if not vs:
        raise InsufficientDataError("cannot bundle an empty sequence")
    width = vs[0].width
    for v in vs[1:]:
        if v.width != width:
            raise WidthMismatchError(width, v.width)
    counts = np.sum([v.bits for v in vs], axis=0, dtype=np.int64)
    twice = 2 * counts
    coin = random_vector(width, tie_seed).bits
    return HyperVector.from_bits((twice > len(vs)) | ((twice == len(vs)) & coin))
