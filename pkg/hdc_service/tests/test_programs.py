import numpy as np
import pytest

from app.core.errors import GeometryError
from app.models.hypervector import Geometry, HyperVector, hamming, random_vector
from app.models.memory import AssociativeMemory
from app.schemas.run_config import Application, BundlingMode
from app.services.algos import bearing, emg, lang
from app.services.algos.programs import build_application_program, generate_program, program_layout
from app.services.algos.runner import AcceleratorRunner
from app.services.encoder_service import EncoderContext


def sentence(rng, length):
    return "".join(rng.choice(list(lang.ALPHABET), size=length))


def vm_run(ctx, program, samples, image=None):
    return AcceleratorRunner(ctx, program, image, workers=1).run_item(0, samples).report


@pytest.mark.parametrize("app,words", [(Application.LANG, 14), (Application.EMG, 11), (Application.BEARING, 9)])
def test_program_sizes(geometry, app, words):
    assert len(build_application_program(app, geometry)) == words


def test_folded_programs_stay_small():
    g = Geometry(d=2048, k=4)
    assert len(build_application_program(Application.LANG, g)) <= 16
    assert len(build_application_program(Application.EMG, g)) <= 14
    assert len(build_application_program(Application.BEARING, g)) <= 11


def test_layouts(geometry):
    assert program_layout(Application.LANG, geometry).vector_slots == 6
    assert program_layout(Application.EMG, geometry).vector_slots == 2
    assert program_layout(Application.BEARING, geometry).vector_slots == 1
    assert program_layout(Application.LANG, geometry).scratch_rows == (21, 22, 23, 24, 25)


def test_layout_needs_enough_rows():
    with pytest.raises(GeometryError):
        program_layout(Application.LANG, Geometry(d=512, am_rows=8), classes=3)


def test_lang_cycles_per_sentence(ctx, rng):
    program = build_application_program(Application.LANG, ctx.geometry)
    symbols = lang.symbols_of(sentence(rng, 100))
    report = vm_run(ctx, program, symbols)
    assert report.cycles == 14 * 100 + 21 + 6
    assert 1260 <= report.cycles <= 1540


def test_lang_cycles_per_character_slope(ctx, rng):
    short = build_application_program(Application.LANG, ctx.geometry, length=50)
    long = build_application_program(Application.LANG, ctx.geometry, length=60)
    a = vm_run(ctx, short, lang.symbols_of(sentence(rng, 50))).cycles
    b = vm_run(ctx, long, lang.symbols_of(sentence(rng, 60))).cycles
    assert (b - a) / 10 == 14


def test_emg_cycles_per_window(ctx, rng):
    program = build_application_program(Application.EMG, ctx.geometry)
    window = rng.integers(0, 128, size=(5, 64))
    report = vm_run(ctx, program, emg.window_stream([window]))
    assert report.cycles == 670
    assert abs(report.cycles - 678) <= 0.05 * 678


def test_bearing_cycles_per_classification(ctx, rng):
    program = build_application_program(Application.BEARING, ctx.geometry)
    report = vm_run(ctx, program, rng.integers(0, 128, size=1250).tolist())
    assert report.cycles == 12512
    assert abs(report.cycles - 12513) <= 0.05 * 12513


@pytest.mark.parametrize("k", [1, 2, 4])
def test_lang_vm_matches_counter_reference(constants, k, rng):
    ctx = EncoderContext(Geometry(d=1024, k=k, am_rows=32), constants)
    text = sentence(rng, 40)
    program = build_application_program(Application.LANG, ctx.geometry, classes=3, length=len(text))
    report = vm_run(ctx, program, lang.symbols_of(text))
    expected = lang.lang_encode_reference(text, ctx, mode=BundlingMode.COUNTER)
    assert report.final_state.am.flat_row(ctx.geometry.search_slot) == expected


@pytest.mark.parametrize("k", [1, 2, 4])
def test_emg_vm_matches_reference(constants, k, rng):
    ctx = EncoderContext(Geometry(d=1024, k=k, am_rows=32), constants)
    window = rng.integers(0, 128, size=(5, 64))
    program = build_application_program(Application.EMG, ctx.geometry)
    report = vm_run(ctx, program, emg.window_stream([window]))
    expected = emg.emg_encode_reference(window, ctx, mode=BundlingMode.COUNTER)
    assert report.final_state.am.flat_row(ctx.geometry.search_slot) == expected


@pytest.mark.parametrize("k", [1, 2])
def test_bearing_vm_matches_counter_reference(constants, k, rng):
    ctx = EncoderContext(Geometry(d=512, k=k, am_rows=8), constants)
    record = rng.normal(size=bearing.MIN_RECORD_SAMPLES)
    model = bearing.BearingModel(norm_factor=2.5)
    program = build_application_program(Application.BEARING, ctx.geometry)
    report = vm_run(ctx, program, model.measurement_stream(record))
    expected = bearing.bearing_encode_reference(record, model, ctx, BundlingMode.COUNTER)
    assert report.final_state.am.flat_row(ctx.geometry.search_slot) == expected


def test_bearing_alarm_interrupt(constants, rng):
    ctx = EncoderContext(Geometry(d=512, k=1, am_rows=8), constants)
    record = rng.normal(size=bearing.MIN_RECORD_SAMPLES)
    model = bearing.BearingModel(norm_factor=2.5)
    measurement = bearing.bearing_encode_reference(record, model, ctx, BundlingMode.COUNTER)
    stream = model.measurement_stream(record)
    far = random_vector(512, 77)
    distance = hamming(measurement, far)

    for reference, alarm, fires in [(measurement, 100, False), (far, distance - 1, True), (far, distance, False)]:
        model.reference = reference
        image = AssociativeMemory(ctx.geometry)
        image.write_row(0, bearing.complement_prototype(model))
        program = build_application_program(Application.BEARING, ctx.geometry, alarm_distance=alarm)
        report = vm_run(ctx, program, stream, image)
        assert report.last_search.distance == 512 - hamming(measurement, reference)
        assert bool(report.interrupts) is fires


def test_bearing_alarm_interrupt_wide_vectors(constants, rng):
    d = 8192
    ctx = EncoderContext(Geometry(d=d, k=1, am_rows=8), constants)
    record = rng.normal(size=bearing.MIN_RECORD_SAMPLES)
    model = bearing.BearingModel(norm_factor=2.5)
    measurement = bearing.bearing_encode_reference(record, model, ctx, BundlingMode.COUNTER)
    stream = model.measurement_stream(record)

    with pytest.raises(GeometryError):
        build_application_program(Application.BEARING, ctx.geometry, alarm_distance=d // 4)

    # alarma por defecto: la mas baja que cabe en el campo de 12 bit
    program = build_application_program(Application.BEARING, ctx.geometry)
    for flipped, fires in [(4096, False), (4097, True), (6000, True)]:
        bits = measurement.bits.copy()
        bits[:flipped] ^= True
        model.reference = HyperVector.from_bits(bits)
        image = AssociativeMemory(ctx.geometry)
        image.write_row(0, bearing.complement_prototype(model))
        report = vm_run(ctx, program, stream, image)
        assert report.last_search.distance == d - flipped
        assert bool(report.interrupts) is fires


def test_lang_classification_matches_nearest_prototype(constants, rng):
    ctx = EncoderContext(Geometry(d=1024, k=1, am_rows=32), constants)
    texts = [sentence(rng, 30) for _ in range(3)]
    prototypes = [lang.lang_encode_reference(t, ctx, mode=BundlingMode.COUNTER) for t in texts]
    image = AssociativeMemory(ctx.geometry)
    for row, p in enumerate(prototypes):
        image.write_row(row, p)
    program = build_application_program(Application.LANG, ctx.geometry, classes=3, length=30)
    report = vm_run(ctx, program, lang.symbols_of(texts[1]), image)
    assert report.last_search.index == 1
    assert report.last_search.distance == 0


def test_generated_listing_has_labels(geometry):
    text = generate_program(Application.EMG, geometry)
    assert "window_end:" in text and "sample_end:" in text
    assert text.startswith("# EMG")
