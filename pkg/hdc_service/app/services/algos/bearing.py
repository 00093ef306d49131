"""Monitorizacion de rodamientos: deteccion de deriva sobre vibracion cuantizada.

Una medida son 5 ventanas de 250 muestras tomadas cada 125 ms desde el
inicio del registro (20 kHz). Cada muestra se normaliza, se cuantiza a 7
bits y se mapea con im_map; V_W es el bundle de una ventana y V_M el de
las 5 ventanas. La distancia de V_M a la referencia calibrada V_M* se
filtra con una EMA y se compara con la distancia de alarma.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.core.errors import (
    GeometryError,
    InsufficientDataError,
    ModelNotCalibratedError,
    NonMonotonicTimeError,
    ShapeError,
)
from app.models.hypervector import HyperVector, hamming
from app.schemas.run_config import BundlingMode
from app.services.algos.bundling import Bundler, bundle_rows
from app.services.encoder_service import EncoderContext

logger = logging.getLogger(__name__)

SAMPLE_RATE_HZ = 20_000
BEARING_WINDOWS = 5
BEARING_WINDOW_SAMPLES = 250
BEARING_WINDOW_STRIDE = 2_500
MIN_RECORD_SAMPLES = (BEARING_WINDOWS - 1) * BEARING_WINDOW_STRIDE + BEARING_WINDOW_SAMPLES
BEARING_WINDOW_SECONDS = 0.5
QUANT_BITS = 7
QUANT_MAX = (1 << QUANT_BITS) - 1
NORM_QUANTILE = 0.99
CALIBRATION_RECORDS = 100
ALARM_SIGMAS = 5.0
SIM_THRESHOLD_MAX = (1 << 12) - 1  # campo sim_threshold de intr


def measurement_windows(record) -> np.ndarray:
    """(5, 250) muestras crudas; acepta un registro 1-D o ventanas ya cortadas."""
    data = np.asarray(record, dtype=np.float64)
    if data.shape == (BEARING_WINDOWS, BEARING_WINDOW_SAMPLES):
        return data
    if data.ndim != 1 or data.size < MIN_RECORD_SAMPLES:
        raise ShapeError(
            f"bearing record must be 1-D with at least {MIN_RECORD_SAMPLES} samples, got shape {data.shape}"
        )
    starts = np.arange(BEARING_WINDOWS) * BEARING_WINDOW_STRIDE
    return np.stack([data[s:s + BEARING_WINDOW_SAMPLES] for s in starts])


def quantize(samples, norm_factor: float) -> np.ndarray:
    """q = clip(rint(|x| / norm * 127), 0, 127)."""
    scaled = np.abs(np.asarray(samples, dtype=np.float64)) / norm_factor * QUANT_MAX
    return np.clip(np.rint(scaled), 0, QUANT_MAX).astype(np.int64)


@dataclass
class BearingModel:
    norm_factor: Optional[float] = None
    reference: Optional[HyperVector] = None
    alarm_distance: Optional[float] = None
    calibration_mean: Optional[float] = None
    calibration_std: Optional[float] = None
    half_life_hours: float = 5.0

    @property
    def calibrated(self) -> bool:
        return self.norm_factor is not None and self.reference is not None

    def require_calibration(self) -> None:
        if self.norm_factor is None:
            raise ModelNotCalibratedError("bearing model has no normalization factor; calibrate first")

    def measurement_stream(self, record) -> list[int]:
        """Muestras cuantizadas en el orden del microcodigo (ventana, luego muestra)."""
        self.require_calibration()
        return [int(q) for q in quantize(measurement_windows(record), self.norm_factor).reshape(-1)]

    def distance(self, measurement: HyperVector) -> int:
        if self.reference is None:
            raise ModelNotCalibratedError("bearing model has no reference vector; calibrate first")
        return hamming(measurement, self.reference)


def bearing_encode_reference(
    record,
    model: BearingModel,
    ctx: EncoderContext,
    mode: Union[BundlingMode, str] = BundlingMode.EXACT,
) -> HyperVector:
    model.require_calibration()
    q = quantize(measurement_windows(record), model.norm_factor)
    items = ctx.item_table(QUANT_BITS)
    mode = BundlingMode(mode)
    if mode is BundlingMode.COUNTER:
        # el microcodigo acumula las 1250 muestras en un unico banco
        bundler = Bundler(ctx.geometry.d, mode)
        for row in q:
            bundler.add_many(items[row])
        return bundler.result()
    window_vectors = np.stack([bundle_rows(items[row], mode) for row in q])
    return HyperVector.from_bits(bundle_rows(window_vectors, mode))


def calibrate_bearing(
    records: Sequence,
    ctx: EncoderContext,
    seed: int = 0,
    count: int = CALIBRATION_RECORDS,
    sigmas: float = ALARM_SIGMAS,
    mode: Union[BundlingMode, str] = BundlingMode.EXACT,
    half_life_hours: float = 5.0,
) -> BearingModel:
    if len(records) < count:
        raise InsufficientDataError(f"calibration needs at least {count} records, got {len(records)}")
    amplitudes = np.concatenate([np.abs(np.asarray(r, dtype=np.float64)).reshape(-1) for r in records])
    norm_factor = float(np.quantile(amplitudes, NORM_QUANTILE))
    if norm_factor <= 0:
        logger.warning("[BEARING] Calibration data has zero amplitude; using normalization factor 1.0")
        norm_factor = 1.0

    model = BearingModel(norm_factor=norm_factor, half_life_hours=half_life_hours)
    measurements = [bearing_encode_reference(r, model, ctx, mode) for r in records]
    chosen = np.sort(np.random.default_rng(seed).choice(len(records), size=count, replace=False))
    model.reference = HyperVector.from_bits(
        bundle_rows(np.stack([measurements[i].bits for i in chosen]), BundlingMode.EXACT)
    )
    distances = np.array([hamming(m, model.reference) for m in measurements], dtype=np.float64)
    model.calibration_mean = float(distances.mean())
    model.calibration_std = float(distances.std())
    model.alarm_distance = model.calibration_mean + sigmas * model.calibration_std
    logger.info(
        f"[BEARING] Calibrated on {len(records)} records: norm={norm_factor:.6g} "
        f"mean={model.calibration_mean:.1f} std={model.calibration_std:.1f} alarm={model.alarm_distance:.1f}"
    )
    return model


def complement_prototype(model: BearingModel) -> HyperVector:
    """Fila de AM para el microcodigo: la distancia de busqueda vale D - d(V_M, V_M*)."""
    if model.reference is None:
        raise ModelNotCalibratedError("bearing model has no reference vector; calibrate first")
    return ~model.reference


def min_alarm_distance(d: int) -> int:
    """Alarma mas baja que cabe en el campo sim_threshold de 12 bit."""
    return max(0, d - SIM_THRESHOLD_MAX - 1)


def alarm_sim_threshold(d: int, alarm_distance: float) -> int:
    """Umbral de `intr` que se dispara cuando d(V_M, V_M*) supera la alarma.

    Con D > 4096 una alarma por debajo de `min_alarm_distance(d)` no cabe en
    el campo: GeometryError en vez de saturar.
    """
    threshold = d - int(np.floor(alarm_distance)) - 1
    if threshold > SIM_THRESHOLD_MAX:
        raise GeometryError(
            f"alarm distance {alarm_distance:g} needs sim_threshold {threshold} > {SIM_THRESHOLD_MAX} at d={d}; "
            f"the lowest encodable alarm is {min_alarm_distance(d)}"
        )
    return max(0, threshold)


def hours_since(timestamps) -> np.ndarray:
    """Horas desde la primera marca; acepta numeros (horas) o fechas."""
    values = np.asarray(timestamps)
    if values.size == 0:
        return values.astype(np.float64)
    if np.issubdtype(values.dtype, np.number):
        return values.astype(np.float64)
    stamps = pd.to_datetime(pd.Series(timestamps))
    return ((stamps - stamps.iloc[0]) / pd.Timedelta(hours=1)).to_numpy(dtype=np.float64)


def ema_filter(times, values, half_life_hours: float = 5.0) -> np.ndarray:
    """y_i = a x_i + (1 - a) y_{i-1}, a = 1 - 2^(-dt / half_life); y_0 = x_0."""
    t = hours_since(times)
    x = np.asarray(values, dtype=np.float64)
    if t.shape != x.shape:
        raise ShapeError(f"times and values differ in length: {t.shape} != {x.shape}")
    if half_life_hours <= 0:
        raise InsufficientDataError("half-life must be positive")
    y = np.empty_like(x)
    if x.size == 0:
        return y
    dt = np.diff(t)
    if np.any(dt < 0):
        position = int(np.argmax(dt < 0)) + 1
        raise NonMonotonicTimeError(f"timestamp {position} goes back in time")
    alpha = 1.0 - np.exp2(-dt / half_life_hours)
    y[0] = x[0]
    for i in range(1, x.size):
        y[i] = alpha[i - 1] * x[i] + (1.0 - alpha[i - 1]) * y[i - 1]
    return y


def realtime_frequency(cycles: int, window_seconds: float) -> float:
    """Frecuencia de reloj minima para clasificar en tiempo real."""
    if window_seconds <= 0:
        raise InsufficientDataError("window duration must be positive")
    return cycles / window_seconds
