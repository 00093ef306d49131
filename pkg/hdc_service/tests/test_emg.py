import numpy as np
import pytest

from app.core.errors import InsufficientDataError, OperandRangeError, ShapeError
from app.models.hypervector import HyperVector, hamming
from app.services.algos.emg import (
    EMG_CHANNELS,
    EMG_SAMPLES,
    EmgModel,
    check_window,
    emg_encode_reference,
    emg_label_table,
    emg_value_table,
    window_stream,
)
from app.services.encoder_service import channel_label_next


def test_label_table_follows_pi0(ctx):
    labels = emg_label_table(ctx)
    assert labels.shape == (EMG_CHANNELS, 2048)
    assert HyperVector.from_bits(labels[0]) == ctx.seed_vector
    assert HyperVector.from_bits(labels[1]) == channel_label_next(ctx.seed_vector, ctx.mixer)
    assert len({HyperVector.from_bits(row) for row in labels}) == EMG_CHANNELS


def test_folded_label_table_is_per_part(ctx_folded):
    labels = emg_label_table(ctx_folded)
    width = ctx_folded.geometry.width
    assert not np.array_equal(labels[0, :width], labels[0, width:])


def test_value_table_distance_grows_with_amplitude(ctx):
    values = emg_value_table(ctx)
    base = HyperVector.from_bits(values[0])
    assert base == ctx.seed_vector
    assert hamming(base, HyperVector.from_bits(values[127])) == 127 * 16


def test_check_window():
    good = np.zeros((EMG_SAMPLES, EMG_CHANNELS), dtype=np.int64)
    assert check_window(good.astype(np.float64)).dtype == np.int64
    with pytest.raises(ShapeError):
        check_window(np.zeros((EMG_CHANNELS, EMG_SAMPLES)))
    with pytest.raises(OperandRangeError):
        check_window(good + 128)
    with pytest.raises(OperandRangeError):
        check_window(good + 0.5)


def test_window_stream_is_time_major(rng):
    window = rng.integers(0, 128, size=(EMG_SAMPLES, EMG_CHANNELS))
    stream = window_stream([window, window])
    assert len(stream) == 2 * EMG_SAMPLES * EMG_CHANNELS
    assert stream[:EMG_CHANNELS] == window[0].tolist()


def test_similar_windows_encode_close(ctx, rng):
    window = rng.integers(0, 128, size=(EMG_SAMPLES, EMG_CHANNELS))
    nudged = np.clip(window + rng.integers(-2, 3, size=window.shape), 0, 127)
    other = rng.integers(0, 128, size=window.shape)
    anchor = emg_encode_reference(window, ctx)
    assert hamming(anchor, emg_encode_reference(nudged, ctx)) < hamming(anchor, emg_encode_reference(other, ctx))


def test_emg_model(ctx, rng):
    windows = [rng.integers(0, 128, size=(EMG_SAMPLES, EMG_CHANNELS)) for _ in range(3)]
    model = EmgModel(labels=["a", "b", "c"], prototypes=[emg_encode_reference(w, ctx) for w in windows])
    result = model.classify(windows[2], ctx)
    assert (result.index, result.distance) == (2, 0)
    with pytest.raises(InsufficientDataError):
        EmgModel(labels=["a"], prototypes=[])


def test_channel_shuffle_is_covariant_through_labels(ctx, rng):
    window = rng.integers(0, 128, size=(EMG_SAMPLES, EMG_CHANNELS))
    labels = emg_label_table(ctx)
    order = rng.permutation(EMG_CHANNELS)
    anchor = emg_encode_reference(window, ctx)
    assert emg_encode_reference(window[:, order], ctx, labels=labels[order]) == anchor
    # barajar solo los canales si cambia la salida
    assert emg_encode_reference(window[:, order], ctx) != anchor
