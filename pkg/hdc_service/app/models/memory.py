"""Memoria asociativa: almacen de vectores por (fila, parte) y busqueda por Hamming."""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.core.errors import AddressError, DataFormatError, WidthMismatchError
from app.models.hypervector import POPCOUNT8, Geometry, HyperVector

logger = logging.getLogger(__name__)

_IMAGE_HEADER = struct.Struct("<III")


@dataclass(frozen=True)
class SearchResult:
    index: int
    distance: int


def interrupt_eval(result: SearchResult, sim_threshold: int, index_threshold: int) -> bool:
    return result.distance <= sim_threshold and result.index <= index_threshold


class AssociativeMemory:
    """Filas x partes de `width` bits; la ultima fila es el vector de busqueda.

    Arranca a ceros. Un unico escritor por instancia; `snapshot()` da una
    copia congelada para busquedas concurrentes.
    """

    def __init__(self, geometry: Geometry):
        self.geometry = geometry
        self._rows = np.zeros((geometry.am_rows, geometry.k, geometry.width // 8), dtype=np.uint8)

    def _check(self, addr: int, part: int) -> None:
        if not 0 <= addr < self.geometry.am_rows:
            raise AddressError(f"AM row {addr} outside [0, {self.geometry.am_rows})")
        if not 0 <= part < self.geometry.k:
            raise AddressError(f"AM part {part} outside [0, {self.geometry.k})")

    def write(self, addr: int, part: int, v: HyperVector) -> None:
        self._check(addr, part)
        if v.width != self.geometry.width:
            raise WidthMismatchError(v.width, self.geometry.width)
        self._rows[addr, part] = v.packed

    def read(self, addr: int, part: int) -> HyperVector:
        self._check(addr, part)
        return HyperVector(self._rows[addr, part], self.geometry.width)

    def write_row(self, addr: int, v: HyperVector) -> None:
        """Escribe un vector de dimension completa repartido en las K partes."""
        if v.width != self.geometry.d:
            raise WidthMismatchError(v.width, self.geometry.d)
        for part, sub in enumerate(v.split(self.geometry.k)):
            self.write(addr, part, sub)

    def flat_row(self, addr: int) -> HyperVector:
        self._check(addr, 0)
        bits = np.unpackbits(self._rows[addr], axis=-1, bitorder="little").reshape(-1).astype(bool)
        return HyperVector.from_bits(bits)

    def associative_search(self, max_index: int) -> SearchResult:
        search_slot = self.geometry.search_slot
        if not 1 <= max_index <= search_slot:
            raise AddressError(f"max_index {max_index} outside [1, {search_slot}]")
        diff = self._rows[:max_index] ^ self._rows[search_slot]
        distances = POPCOUNT8[diff].reshape(max_index, -1).sum(axis=1, dtype=np.int64)
        # argmin devuelve el primer minimo: gana el indice mas bajo
        index = int(np.argmin(distances))
        return SearchResult(index=index, distance=int(distances[index]))

    def copy_rows_from(self, other: "AssociativeMemory", rows: range) -> None:
        if other.geometry != self.geometry:
            raise WidthMismatchError(other.geometry.d, self.geometry.d)
        self._rows[rows.start:rows.stop] = other._rows[rows.start:rows.stop]

    def snapshot(self) -> "AssociativeMemory":
        clone = AssociativeMemory(self.geometry)
        clone._rows = self._rows.copy()
        clone._rows.setflags(write=False)
        return clone

    def __eq__(self, other) -> bool:
        if not isinstance(other, AssociativeMemory):
            return NotImplemented
        return self.geometry == other.geometry and np.array_equal(self._rows, other._rows)

    def dump(self, path: Path) -> None:
        path = Path(path)
        g = self.geometry
        path.write_bytes(_IMAGE_HEADER.pack(g.d, g.k, g.am_rows) + self._rows.tobytes())
        logger.info(f"[AM] Wrote image {path} ({g.am_rows} rows x {g.k} parts x {g.width} bits)")

    @classmethod
    def load(cls, path: Path) -> "AssociativeMemory":
        path = Path(path)
        if not path.exists():
            raise DataFormatError(path, "AM image not found")
        data = path.read_bytes()
        if len(data) < _IMAGE_HEADER.size:
            raise DataFormatError(path, "truncated AM image header")
        d, k, am_rows = _IMAGE_HEADER.unpack_from(data)
        try:
            geometry = Geometry(d=d, k=k, am_rows=am_rows)
        except ValueError as exc:
            raise DataFormatError(path, f"invalid geometry in header: {exc}")
        body = np.frombuffer(data, dtype=np.uint8, offset=_IMAGE_HEADER.size)
        expected = am_rows * k * (geometry.width // 8)
        if body.size != expected:
            raise DataFormatError(path, f"image body has {body.size} bytes, expected {expected}")
        memory = cls(geometry)
        memory._rows = body.reshape(am_rows, k, geometry.width // 8).copy()
        logger.debug(f"[AM] Loaded image {path} d={d} k={k} rows={am_rows}")
        return memory
