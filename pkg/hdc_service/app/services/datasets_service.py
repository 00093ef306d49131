"""Cargadores de los tres corpus de evaluacion y generadores sinteticos deterministas."""
import logging
import re
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.core.errors import DataFormatError, InsufficientDataError
from app.schemas.datasets import (
    BearingRecord,
    BearingRecording,
    EmgRecording,
    LabeledSentence,
    TextCorpus,
)
from app.services.algos.emg import EMG_CHANNELS, EMG_SAMPLES, SAMPLE_MAX
from app.services.algos.lang import ALPHABET

logger = logging.getLogger(__name__)

EMG_COLUMNS = [f"ch{i}" for i in range(EMG_CHANNELS)]
IMS_TIMESTAMP_FORMAT = "%Y.%m.%d.%H.%M.%S"
IMS_RECORD_SAMPLES = 20_480
# set 1: dos canales por rodamiento
IMS_SET1_CHANNELS = {1: (0, 1), 2: (2, 3), 3: (4, 5), 4: (6, 7)}
SYNTH_BEARING_START = datetime(2003, 10, 22, 12, 6, 24)
SYNTH_BEARING_INTERVAL = timedelta(minutes=10)

_NON_LETTERS = re.compile(r"[^a-z]+")
_PARSER_LINE = re.compile(r"line (\d+)")


def _read_table(path: Path, **options) -> pd.DataFrame:
    """`pd.read_csv` con los fallos de pandas convertidos en DataFormatError posicional."""
    try:
        return pd.read_csv(path, **options)
    except pd.errors.EmptyDataError:
        raise DataFormatError(path, "file is empty")
    except pd.errors.ParserError as exc:
        match = _PARSER_LINE.search(str(exc))
        raise DataFormatError(path, "malformed table row", line=int(match.group(1)) if match else None)
    except UnicodeDecodeError as exc:
        raise DataFormatError(path, f"not valid UTF-8 text: {exc.reason}")


# --- texto -------------------------------------------------------------------

def clean_sentence(text: str) -> str:
    """Minusculas; todo lo que no es [a-z] pasa a espacio y los espacios se colapsan."""
    return _NON_LETTERS.sub(" ", text.lower()).strip()


def _read_sentences(path: Path) -> list[str]:
    try:
        raw = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(path, f"not valid UTF-8 text: {exc.reason}")
    sentences = [clean_sentence(line) for line in raw.splitlines()]
    return [s for s in sentences if s]


def load_text_corpus(path: Path) -> TextCorpus:
    """`<idioma>.txt` de primer nivel para entrenar; `test/<idioma>.txt` para evaluar."""
    path = Path(path)
    if not path.is_dir():
        raise DataFormatError(path, "text corpus directory not found")
    train_files = sorted(path.glob("*.txt"))
    if not train_files:
        raise DataFormatError(path, "no *.txt language files found")
    labels = [f.stem for f in train_files]
    train = [LabeledSentence(label=f.stem, text=s) for f in train_files for s in _read_sentences(f)]

    test = []
    test_dir = path / "test"
    if test_dir.is_dir():
        for f in sorted(test_dir.glob("*.txt")):
            if f.stem not in labels:
                raise DataFormatError(f, f"test language {f.stem!r} has no training file")
            test.extend(LabeledSentence(label=f.stem, text=s) for s in _read_sentences(f))
    logger.info(f"[DATASETS] Text corpus {path}: {len(labels)} languages, {len(train)} train, {len(test)} test")
    return TextCorpus(labels=labels, train=train, test=test)


def synth_lang(languages: int, sentences: int, seed: int, length: int = 100, concentration: float = 0.15) -> TextCorpus:
    """Cadenas de Markov de bigramas por idioma, muy picudas (Dirichlet de baja concentracion)."""
    if languages < 1 or sentences < 1 or length < 1:
        raise InsufficientDataError("synth_lang needs at least one language, sentence and symbol")
    rng = np.random.default_rng(seed)
    symbols = np.array(list(ALPHABET))
    size = len(ALPHABET)
    labels = [f"lang{i:02d}" for i in range(languages)]
    splits: dict[str, list[LabeledSentence]] = {"train": [], "test": []}
    for label in labels:
        transitions = rng.dirichlet(np.full(size, concentration), size=size)
        cumulative = np.cumsum(transitions, axis=1)
        for split in ("train", "test"):
            for _ in range(sentences):
                state = int(rng.integers(size))
                draws = rng.random(length)
                chain = np.empty(length, dtype=np.int64)
                for i in range(length):
                    chain[i] = state
                    state = min(int(np.searchsorted(cumulative[state], draws[i], side="right")), size - 1)
                splits[split].append(LabeledSentence(label=label, text="".join(symbols[chain])))
    return TextCorpus(labels=labels, train=splits["train"], test=splits["test"])


# --- EMG ---------------------------------------------------------------------

def _emg_windows(values: np.ndarray, labels: np.ndarray, path) -> tuple[np.ndarray, list[str]]:
    windows, window_labels = [], []
    dropped = 0
    for start in range(0, len(labels) - EMG_SAMPLES + 1, EMG_SAMPLES):
        block = labels[start:start + EMG_SAMPLES]
        if np.any(block != block[0]):
            dropped += 1
            continue
        windows.append(values[start:start + EMG_SAMPLES])
        window_labels.append(str(block[0]))
    if dropped:
        logger.warning(f"[DATASETS] {path}: dropped {dropped} windows with mixed gesture labels")
    if len(labels) % EMG_SAMPLES:
        logger.warning(f"[DATASETS] {path}: ignoring {len(labels) % EMG_SAMPLES} trailing rows")
    shape = (len(windows), EMG_SAMPLES, EMG_CHANNELS)
    return (np.stack(windows) if windows else np.zeros(shape, dtype=np.int64)), window_labels


def _decimate(values: np.ndarray, labels: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Media por bloques de `factor` filas; los bloques con etiqueta mixta se descartan."""
    keep_values, keep_labels = [], []
    for start in range(0, len(labels) - factor + 1, factor):
        block = labels[start:start + factor]
        if np.all(block == block[0]):
            keep_values.append(np.rint(values[start:start + factor].mean(axis=0)))
            keep_labels.append(block[0])
    if not keep_values:
        return np.zeros((0, EMG_CHANNELS), dtype=np.int64), np.array([], dtype=object)
    return np.stack(keep_values).astype(np.int64), np.array(keep_labels, dtype=object)


def load_emg_csv(path: Path, decimate: int = 1) -> EmgRecording:
    path = Path(path)
    if not path.exists():
        raise DataFormatError(path, "EMG CSV not found")
    if decimate < 1:
        raise InsufficientDataError("decimate must be >= 1")
    frame = _read_table(path)
    missing = [c for c in EMG_COLUMNS + ["label"] if c not in frame.columns]
    if missing:
        raise DataFormatError(path, f"missing columns {missing[:3]}{'...' if len(missing) > 3 else ''}", line=1)
    data = frame[EMG_COLUMNS]
    numeric = data.apply(pd.to_numeric, errors="coerce")
    bad_rows = numeric.isna().any(axis=1) | (numeric < 0).any(axis=1) | (numeric > SAMPLE_MAX).any(axis=1)
    bad_rows |= (numeric % 1 != 0).any(axis=1)
    if bad_rows.any():
        row = int(np.argmax(bad_rows.to_numpy()))
        # +2: cabecera y numeracion desde 1
        raise DataFormatError(path, f"EMG values must be integers in [0, {SAMPLE_MAX}]", line=row + 2)
    values = numeric.to_numpy(dtype=np.int64)
    labels = frame["label"].astype(str).to_numpy(dtype=object)
    if decimate > 1:
        values, labels = _decimate(values, labels, decimate)
    windows, window_labels = _emg_windows(values, labels, path)
    ordered = list(dict.fromkeys(window_labels))
    logger.info(f"[DATASETS] EMG {path}: {len(window_labels)} windows, {len(ordered)} gestures")
    return EmgRecording(labels=ordered, windows=windows, window_labels=window_labels)


def write_emg_csv(recording: EmgRecording, path: Path) -> None:
    rows = recording.windows.reshape(-1, EMG_CHANNELS)
    frame = pd.DataFrame(rows, columns=EMG_COLUMNS)
    frame["label"] = np.repeat(recording.window_labels, EMG_SAMPLES)
    frame.to_csv(path, index=False)
    logger.info(f"[DATASETS] Wrote {len(recording)} EMG windows to {path}")


def synth_emg(gestures: int, windows: int, seed: int, noise: float = 6.0) -> EmgRecording:
    """Patron fijo de medias por canal para cada gesto mas ruido gaussiano."""
    if gestures < 1 or windows < 1:
        raise InsufficientDataError("synth_emg needs at least one gesture and one window")
    rng = np.random.default_rng(seed)
    means = rng.uniform(10, 117, size=(gestures, EMG_CHANNELS))
    labels = [f"gesture{g}" for g in range(gestures)]
    data = np.empty((gestures * windows, EMG_SAMPLES, EMG_CHANNELS), dtype=np.int64)
    window_labels = []
    for g in range(gestures):
        noisy = means[g] + rng.normal(0.0, noise, size=(windows, EMG_SAMPLES, EMG_CHANNELS))
        data[g * windows:(g + 1) * windows] = np.clip(np.rint(noisy), 0, SAMPLE_MAX)
        window_labels.extend([labels[g]] * windows)
    # intercalado para que cualquier prefijo tenga todas las clases
    order = np.arange(gestures * windows).reshape(gestures, windows).T.reshape(-1)
    return EmgRecording(labels=labels, windows=data[order], window_labels=[window_labels[i] for i in order])


# --- rodamientos (IMS) -------------------------------------------------------

def parse_ims_timestamp(name: str) -> datetime:
    try:
        return pd.to_datetime(name, format=IMS_TIMESTAMP_FORMAT).to_pydatetime()
    except ValueError:
        raise DataFormatError(name, f"file name is not an IMS timestamp ({IMS_TIMESTAMP_FORMAT})")


def bearing_channel(bearing: int, axis: int = 0) -> int:
    if bearing not in IMS_SET1_CHANNELS or axis not in (0, 1):
        raise InsufficientDataError(f"set 1 has bearings 1-4 with axes 0-1, got bearing {bearing} axis {axis}")
    return IMS_SET1_CHANNELS[bearing][axis]


def read_ims_record(path: Path, channel: int) -> np.ndarray:
    frame = _read_table(path, sep=r"\s+", header=None)
    if channel >= frame.shape[1]:
        raise DataFormatError(path, f"channel {channel} missing; record has {frame.shape[1]} columns")
    column = pd.to_numeric(frame[channel], errors="coerce")
    if column.isna().any():
        raise DataFormatError(path, f"non-numeric value in channel {channel}", line=int(column.isna().to_numpy().argmax()) + 1)
    return column.to_numpy(dtype=np.float64)


def record_samples(record: BearingRecord) -> np.ndarray:
    if record.data is not None:
        return record.data
    if record.path is None:
        raise DataFormatError("<memory>", "bearing record has neither data nor path")
    return read_ims_record(record.path, record.channel)


def load_ims_bearing(path: Path, channel: int = 0) -> BearingRecording:
    """Un fichero por registro; el nombre codifica la marca temporal. Lectura perezosa."""
    path = Path(path)
    if not path.is_dir():
        raise DataFormatError(path, "IMS directory not found")
    records = []
    for f in path.iterdir():
        if f.is_file() and not f.name.startswith("."):
            records.append(BearingRecord(timestamp=parse_ims_timestamp(f.name), path=f, channel=channel))
    if not records:
        raise DataFormatError(path, "no IMS record files found")
    records.sort(key=lambda r: r.timestamp)
    logger.info(f"[DATASETS] IMS {path}: {len(records)} records, channel {channel}")
    return BearingRecording(records=records)


def synth_bearing(
    drift_at: float,
    seed: int,
    records: int,
    magnitude: float = 1.0,
    samples: int = IMS_RECORD_SAMPLES,
) -> BearingRecording:
    """Vibracion gaussiana; tras `drift_at` horas la desviacion se multiplica por 1 + magnitude."""
    if records < 1 or samples < 1:
        raise InsufficientDataError("synth_bearing needs at least one record and one sample")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(records):
        timestamp = SYNTH_BEARING_START + i * SYNTH_BEARING_INTERVAL
        hours = i * SYNTH_BEARING_INTERVAL.total_seconds() / 3600.0
        scale = 1.0 + magnitude if hours >= drift_at else 1.0
        data = (rng.normal(0.0, 1.0, size=samples) * scale).astype(np.float32)
        out.append(BearingRecord(timestamp=timestamp, data=data))
    return BearingRecording(records=out)


def select_hours(recording: BearingRecording, start: float, stop: Optional[float] = None) -> list[int]:
    """Indices de registros con start <= horas < stop."""
    hours = recording.hours()
    mask = hours >= start
    if stop is not None:
        mask &= hours < stop
    return [int(i) for i in np.flatnonzero(mask)]


def records_data(recording: BearingRecording, indices: Sequence[int]) -> list[np.ndarray]:
    return [record_samples(recording.records[i]) for i in indices]
