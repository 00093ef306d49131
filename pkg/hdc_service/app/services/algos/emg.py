"""Reconocimiento de gestos EMG: 64 canales x 5 muestras por ventana."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from app.core.errors import InsufficientDataError, OperandRangeError, ShapeError
from app.models.hypervector import HyperVector
from app.models.memory import SearchResult
from app.schemas.run_config import BundlingMode
from app.services.algos.bundling import bundle_rows
from app.services.algos.lang import nearest_prototype
from app.services.encoder_service import EncoderContext

logger = logging.getLogger(__name__)

EMG_CHANNELS = 64
EMG_SAMPLES = 5
EMG_GESTURES = 5
EMG_WINDOW_SECONDS = 0.5
SAMPLE_MAX = 127


def emg_label_table(ctx: EncoderContext) -> np.ndarray:
    """Etiquetas de canal (64, D): L_0 = P_h S por parte, L_{k+1} = pi0(L_k)."""
    gather = ctx.folded_gather(ctx.mixer.pi0)
    labels = np.empty((EMG_CHANNELS, ctx.geometry.d), dtype=bool)
    labels[0] = ctx.part_seed_bits()
    for k in range(1, EMG_CHANNELS):
        labels[k] = labels[k - 1][gather]
    return labels


def emg_value_table(ctx: EncoderContext) -> np.ndarray:
    """manipulate(S, x) para x en [0, 128), repetido en las K partes."""
    values = ctx.seed_vector.bits[None, :] ^ ctx.manipulator.mask_table
    return np.tile(values, (1, ctx.geometry.k))


def check_window(window) -> np.ndarray:
    window = np.asarray(window)
    if window.shape != (EMG_SAMPLES, EMG_CHANNELS):
        raise ShapeError(f"EMG window must be {EMG_SAMPLES}x{EMG_CHANNELS}, got {window.shape}")
    if not np.issubdtype(window.dtype, np.integer):
        if not np.all(np.equal(np.mod(window, 1), 0)):
            raise OperandRangeError("EMG samples must be integers")
    window = window.astype(np.int64)
    if window.min() < 0 or window.max() > SAMPLE_MAX:
        raise OperandRangeError(f"EMG samples must lie in [0, {SAMPLE_MAX}]")
    return window


def emg_channel_vectors(
    sample: np.ndarray,
    ctx: EncoderContext,
    labels: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Vectores de entrada al bundler para una muestra: manipulate(S, x_k) xor L_k."""
    labels = emg_label_table(ctx) if labels is None else labels
    return emg_value_table(ctx)[np.asarray(sample, dtype=np.int64)] ^ labels


def emg_encode_reference(
    window,
    ctx: EncoderContext,
    mode: Union[BundlingMode, str] = BundlingMode.EXACT,
    labels: Optional[np.ndarray] = None,
) -> HyperVector:
    window = check_window(window)
    labels = emg_label_table(ctx) if labels is None else np.asarray(labels, dtype=bool)
    gather = ctx.folded_gather(ctx.mixer.pi0)
    ngram = np.zeros(ctx.geometry.d, dtype=bool)
    for t in range(EMG_SAMPLES):
        sample_vector = bundle_rows(emg_channel_vectors(window[t], ctx, labels), mode)
        ngram = ngram[gather] ^ sample_vector
    return HyperVector.from_bits(ngram)


@dataclass
class EmgModel:
    labels: list[str]
    prototypes: list[HyperVector]
    channels: int = EMG_CHANNELS
    ngram: int = EMG_SAMPLES

    def __post_init__(self):
        if len(self.labels) != len(self.prototypes):
            raise InsufficientDataError("one prototype per gesture is required")

    def classify(self, window, ctx: EncoderContext, mode: Union[BundlingMode, str] = BundlingMode.EXACT) -> SearchResult:
        return nearest_prototype(emg_encode_reference(window, ctx, mode), self.prototypes)


def window_stream(windows: Sequence[np.ndarray]) -> list[int]:
    """Muestras en el orden en que las consume el microcodigo: tiempo, luego canal."""
    return [int(x) for window in windows for x in check_window(window).reshape(-1)]
