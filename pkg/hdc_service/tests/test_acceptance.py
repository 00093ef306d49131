"""Corridas completas sobre los corpus reales (HDC_LANG_CORPUS, HDC_EMG_CSV, HDC_IMS_DIR) o sinteticos."""
import os
from pathlib import Path

import numpy as np
import pytest

from app.models.encoder import EncoderState
from app.models.hypervector import Geometry, HyperVector, hamming, majority_bundle_reference, random_vector
from app.schemas.run_config import Application, BundlingMode, RunConfig, Via
from app.services.algos.bearing import MIN_RECORD_SAMPLES
from app.services.datasets_service import bearing_channel, synth_bearing, synth_emg
from app.services.encoder_service import EncoderContext, bundle_accumulate, bundle_threshold, manipulate
from app.services.experiments_service import (
    SYNTH_BEARING_DRIFT_HOURS,
    SYNTH_GESTURES,
    LabeledItems,
    classify_items,
    load_bearing_recording,
    load_labeled_items,
    monitor_bearing,
    train_image,
)

FOLDS = [1, 2, 4]
EQUIVALENCE_ITEMS = 200


def _dataset(variable: str) -> Path:
    value = os.environ.get(variable)
    if not value:
        pytest.skip(f"{variable} is not set")
    return Path(value)


def _accuracy(app, dataset, config, constants, via=Via.REFERENCE, compare=False, test_stride=1):
    data = load_labeled_items(app, dataset, config.seed)
    data.test, data.test_labels = data.test[::test_stride], data.test_labels[::test_stride]
    return _summary(data, config, constants, via, compare)


def _summary(data, config, constants, via=Via.REFERENCE, compare=False):
    ctx = EncoderContext(config.geometry, constants)
    image, manifest = train_image(data, ctx, config)
    _, summary = classify_items(data, ctx, image, manifest, config, via, compare)
    return summary


@pytest.mark.slow
def test_synthetic_lang_accuracy(constants):
    summary = _accuracy(Application.LANG, "synth", RunConfig(d=2048), constants)
    assert summary.items == 1000
    assert summary.accuracy >= 0.95


@pytest.mark.slow
def test_synthetic_lang_accuracy_grows_with_dimension(constants):
    accuracies = [
        _accuracy(Application.LANG, "synth", RunConfig(d=d), constants).accuracy for d in (512, 2048, 8192)
    ]
    for smaller, larger in zip(accuracies, accuracies[1:]):
        assert larger >= smaller - 0.01


@pytest.mark.slow
@pytest.mark.parametrize("k", FOLDS)
def test_synthetic_lang_vm_equals_counter_reference(constants, k):
    config = RunConfig(d=2048, k=k, bundling=BundlingMode.COUNTER, workers=4)
    summary = _accuracy(Application.LANG, "synth", config, constants, Via.VM, compare=True, test_stride=5)
    assert summary.items == EQUIVALENCE_ITEMS
    assert summary.mismatches == 0


def _synthetic_emg_items(windows_per_gesture: int) -> LabeledItems:
    recording = synth_emg(SYNTH_GESTURES, windows_per_gesture, seed=0)
    windows, labels = list(recording.windows), recording.window_labels
    # el generador intercala gestos: las posiciones pares entrenan
    return LabeledItems(Application.EMG, recording.labels, windows[0::2], labels[0::2], windows[1::2], labels[1::2])


@pytest.mark.slow
@pytest.mark.parametrize("k", FOLDS)
def test_synthetic_emg_vm_equals_counter_reference(constants, k):
    data = _synthetic_emg_items(2 * EQUIVALENCE_ITEMS // SYNTH_GESTURES)
    config = RunConfig(d=2048, k=k, bundling=BundlingMode.COUNTER, workers=4)
    summary = _summary(data, config, constants, Via.VM, compare=True)
    assert summary.items == EQUIVALENCE_ITEMS
    assert summary.mismatches == 0
    assert summary.accuracy >= 0.98


@pytest.mark.slow
@pytest.mark.parametrize("k", FOLDS)
def test_synthetic_bearing_vm_equals_counter_reference(constants, k):
    recording = synth_bearing(SYNTH_BEARING_DRIFT_HOURS, 0, EQUIVALENCE_ITEMS, samples=MIN_RECORD_SAMPLES)
    config = RunConfig(d=2048, k=k, bundling=BundlingMode.COUNTER, workers=4)
    ctx = EncoderContext(config.geometry, constants)
    vm_rows, _ = monitor_bearing(recording, ctx, config, via=Via.VM)
    reference_rows, _ = monitor_bearing(recording, ctx, config, via=Via.REFERENCE)
    assert len(vm_rows) == EQUIVALENCE_ITEMS
    assert [r.raw_distance for r in vm_rows] == [r.raw_distance for r in reference_rows]


@pytest.mark.parametrize("k", FOLDS)
def test_manipulator_is_exact_at_every_fold(constants, k):
    ctx = EncoderContext(Geometry(d=2048, k=k), constants)
    v = random_vector(ctx.width, 21)
    for w in range(128):
        assert hamming(v, manipulate(v, w, ctx.manipulator)) == w * ctx.width // 128


@pytest.mark.parametrize("k", FOLDS)
def test_folded_counter_bundle_matches_majority(k):
    width = 512 // k
    rng = np.random.default_rng(k)
    for n in range(1, 32, 2):
        for _ in range(10):
            bits = rng.integers(0, 2, size=(n, 512)).astype(bool)
            parts = []
            for h in range(k):
                state = EncoderState.fresh(width)
                for row in bits:
                    bundle_accumulate(state, HyperVector.from_bits(row[h * width:(h + 1) * width]))
                parts.append(bundle_threshold(state).bits)
            expected = majority_bundle_reference([HyperVector.from_bits(row) for row in bits])
            assert HyperVector.from_bits(np.concatenate(parts)) == expected


@pytest.mark.slow
@pytest.mark.dataset
def test_lang_corpus_accuracy(constants):
    summary = _accuracy(Application.LANG, _dataset("HDC_LANG_CORPUS"), RunConfig(d=8192), constants)
    assert summary.accuracy >= 0.93


@pytest.mark.slow
@pytest.mark.dataset
def test_emg_dataset_accuracy(constants):
    summary = _accuracy(Application.EMG, _dataset("HDC_EMG_CSV"), RunConfig(d=8192), constants)
    assert summary.accuracy >= 0.94


@pytest.mark.slow
@pytest.mark.dataset
def test_ims_bearing_drift_is_detected(constants):
    config = RunConfig(d=2048)
    ctx = EncoderContext(config.geometry, constants)
    recording = load_bearing_recording(_dataset("HDC_IMS_DIR"), channel=bearing_channel(3))
    rows, model = monitor_bearing(recording, ctx, config)
    tail = rows[-len(rows) // 20:]
    assert max(row.ema_distance for row in tail) >= 3 * model.calibration_mean
    assert any(row.alarm for row in rows)


@pytest.mark.slow
def test_synthetic_bearing_drift_is_detected(constants):
    config = RunConfig(d=2048)
    ctx = EncoderContext(config.geometry, constants)
    rows, _ = monitor_bearing(load_bearing_recording("synth"), ctx, config)
    assert not any(row.alarm for row in rows[:144])
    assert rows[-1].alarm
