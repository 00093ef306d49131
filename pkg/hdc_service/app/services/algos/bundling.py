"""Bundling de referencia: precision completa o modelo de contadores de 5 bits."""
import logging
from typing import Hashable, Iterable, Optional, Sequence, Union

import numpy as np

from app.core.errors import InsufficientDataError, WidthMismatchError
from app.models.encoder import BundleCounterBank
from app.models.hypervector import HyperVector, majority_bundle_reference
from app.schemas.run_config import BundlingMode

logger = logging.getLogger(__name__)


class Bundler:
    """Acumula vectores de bits en orden y umbraliza.

    `exact` cuenta sin limite y resuelve empates a 1; `counter` reproduce
    bit a bit el banco de contadores saturantes del datapath.
    """

    def __init__(self, width: int, mode: Union[BundlingMode, str] = BundlingMode.EXACT):
        self.width = int(width)
        self.mode = BundlingMode(mode)
        self.count = 0
        if self.mode is BundlingMode.COUNTER:
            self._bank = BundleCounterBank(self.width)
        else:
            self._sums = np.zeros(self.width, dtype=np.int64)

    def add(self, bits: np.ndarray) -> None:
        bits = np.asarray(bits, dtype=bool)
        if bits.shape != (self.width,):
            raise WidthMismatchError(bits.size, self.width)
        if self.mode is BundlingMode.COUNTER:
            self._bank.accumulate_bits(bits)
        else:
            self._sums += bits
        self.count += 1

    def add_many(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=bool)
        if rows.ndim != 2 or rows.shape[1] != self.width:
            raise WidthMismatchError(rows.shape[-1], self.width)
        if self.mode is BundlingMode.COUNTER:
            for row in rows:
                self._bank.accumulate_bits(row)
        else:
            self._sums += rows.sum(axis=0, dtype=np.int64)
        self.count += rows.shape[0]

    def result_bits(self) -> np.ndarray:
        if self.count == 0:
            raise InsufficientDataError("nothing was bundled")
        if self.mode is BundlingMode.COUNTER:
            return self._bank.threshold_bits()
        return 2 * self._sums >= self.count

    def result(self) -> HyperVector:
        return HyperVector.from_bits(self.result_bits())


def bundle_rows(rows: np.ndarray, mode: Union[BundlingMode, str] = BundlingMode.EXACT) -> np.ndarray:
    rows = np.asarray(rows, dtype=bool)
    if rows.ndim != 2 or rows.shape[0] == 0:
        raise InsufficientDataError("bundle_rows expects a non-empty (n, width) array")
    bundler = Bundler(rows.shape[1], mode)
    bundler.add_many(rows)
    return bundler.result_bits()


def train_prototypes(
    labeled: Iterable[tuple[Hashable, HyperVector]],
    labels: Optional[Sequence[Hashable]] = None,
    tie_seed: int = 0,
) -> dict:
    """Prototipo por clase: mayoria de precision completa de sus ejemplos.

    Con `labels` el resultado sigue ese orden y toda clase debe tener al
    menos un ejemplo.
    """
    grouped: dict = {}
    for label, vector in labeled:
        grouped.setdefault(label, []).append(vector)
    order = list(labels) if labels is not None else list(grouped)
    prototypes = {}
    for label in order:
        examples = grouped.get(label)
        if not examples:
            raise InsufficientDataError(f"class {label!r} has no training examples")
        prototypes[label] = majority_bundle_reference(examples, tie_seed=tie_seed)
        logger.debug(f"[TRAIN] Class {label!r}: bundled {len(examples)} examples")
    return prototypes
