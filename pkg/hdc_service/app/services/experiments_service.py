"""Flujos de experimento: entrenar, clasificar, monitorizar y barrer geometrias."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from app.core.constants import SeedConstants
from app.core.errors import (
    CompareMismatchError,
    DataFormatError,
    GeometryError,
    InsufficientDataError,
    SentenceTooShortError,
    UsageError,
)
from app.models.hypervector import Geometry, HyperVector, random_vector
from app.models.memory import AssociativeMemory, SearchResult
from app.schemas.datasets import BearingRecording
from app.schemas.reports import BenchRow, ClassificationRow, ClassificationSummary, ImageManifest, MonitorRow
from app.schemas.run_config import Application, BundlingMode, RunConfig, Via
from app.services.algos import bearing, emg, lang
from app.services.algos.bundling import train_prototypes
from app.services.algos.programs import build_application_program, program_layout
from app.services.algos.runner import AcceleratorRunner
from app.services.datasets_service import (
    load_emg_csv,
    load_ims_bearing,
    load_text_corpus,
    record_samples,
    records_data,
    select_hours,
    synth_bearing,
    synth_emg,
    synth_lang,
)
from app.services.encoder_service import EncoderContext

logger = logging.getLogger(__name__)

SYNTH_KEYWORD = "synth"
SYNTH_LANGUAGES = 4
SYNTH_SENTENCES = 250
SYNTH_GESTURES = 5
SYNTH_WINDOWS = 40
SYNTH_BEARING_RECORDS = 288
SYNTH_BEARING_DRIFT_HOURS = 36.0


@dataclass
class LabeledItems:
    """Items de una aplicacion repartidos en entrenamiento y prueba."""

    app: Application
    labels: list[str]
    train: list = field(default_factory=list)
    train_labels: list[str] = field(default_factory=list)
    test: list = field(default_factory=list)
    test_labels: list[str] = field(default_factory=list)


def _split_alternating(items: Sequence, labels: Sequence[str]) -> tuple[list, list, list, list]:
    train, train_labels, test, test_labels = [], [], [], []
    seen: dict[str, int] = {}
    for item, label in zip(items, labels):
        count = seen.get(label, 0)
        seen[label] = count + 1
        if count % 2 == 0:
            train.append(item)
            train_labels.append(label)
        else:
            test.append(item)
            test_labels.append(label)
    return train, train_labels, test, test_labels


def load_labeled_items(app: Union[Application, str], dataset: Union[Path, str], seed: int = 0) -> LabeledItems:
    app = Application(app)
    synthetic = str(dataset) == SYNTH_KEYWORD
    if app is Application.LANG:
        corpus = synth_lang(SYNTH_LANGUAGES, SYNTH_SENTENCES, seed) if synthetic else load_text_corpus(Path(dataset))
        test = corpus.test
        if not test:
            logger.warning("[DATASETS] Corpus has no test split; evaluating on the training sentences")
            test = corpus.train
        return LabeledItems(
            app=app,
            labels=corpus.labels,
            train=[s.text for s in corpus.train],
            train_labels=[s.label for s in corpus.train],
            test=[s.text for s in test],
            test_labels=[s.label for s in test],
        )
    if app is Application.EMG:
        recording = synth_emg(SYNTH_GESTURES, SYNTH_WINDOWS, seed) if synthetic else load_emg_csv(Path(dataset))
        train, train_labels, test, test_labels = _split_alternating(list(recording.windows), recording.window_labels)
        return LabeledItems(app, recording.labels, train, train_labels, test, test_labels)
    raise UsageError("bearing data is not labeled; use bearing-monitor")


def load_bearing_recording(dataset: Union[Path, str], seed: int = 0, channel: int = 0) -> BearingRecording:
    if str(dataset) == SYNTH_KEYWORD:
        return synth_bearing(SYNTH_BEARING_DRIFT_HOURS, seed, SYNTH_BEARING_RECORDS)
    return load_ims_bearing(Path(dataset), channel)


# --- imagen de AM --------------------------------------------------------------

def manifest_path(image_path: Path) -> Path:
    image_path = Path(image_path)
    return image_path.with_name(image_path.name + ".json")


def save_image(image: AssociativeMemory, manifest: ImageManifest, path: Path) -> None:
    image.dump(path)
    manifest_path(path).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")


def load_image(path: Path) -> tuple[AssociativeMemory, ImageManifest]:
    image = AssociativeMemory.load(path)
    side = manifest_path(path)
    if not side.exists():
        raise DataFormatError(side, "image manifest not found")
    try:
        manifest = ImageManifest.model_validate(json.loads(side.read_text(encoding="utf-8")))
    except (ValueError, TypeError) as exc:
        raise DataFormatError(side, f"invalid image manifest: {exc}")
    g = image.geometry
    if (manifest.d, manifest.k, manifest.am_rows) != (g.d, g.k, g.am_rows):
        raise DataFormatError(side, "manifest geometry disagrees with the image header")
    return image, manifest


def prototypes_of(image: AssociativeMemory, manifest: ImageManifest) -> list[HyperVector]:
    return [image.flat_row(row) for row in range(manifest.class_count)]


# --- codificacion por aplicacion --------------------------------------------

def reference_vector(
    app: Application,
    item,
    ctx: EncoderContext,
    mode: BundlingMode,
    ngram: int = lang.DEFAULT_NGRAM,
    model: Optional[bearing.BearingModel] = None,
) -> HyperVector:
    if app is Application.LANG:
        return lang.lang_encode_reference(item, ctx, ngram, mode)
    if app is Application.EMG:
        return emg.emg_encode_reference(item, ctx, mode)
    return bearing.bearing_encode_reference(item, model, ctx, mode)


def item_stream(app: Application, item, model: Optional[bearing.BearingModel] = None) -> list[int]:
    if app is Application.LANG:
        return [int(s) for s in lang.truncate_sentence(lang.symbols_of(item))]
    if app is Application.EMG:
        return emg.window_stream([item])
    return model.measurement_stream(item)


# --- entrenamiento -------------------------------------------------------------

def train_image(
    data: LabeledItems,
    ctx: EncoderContext,
    config: RunConfig,
) -> tuple[AssociativeMemory, ImageManifest]:
    geometry = ctx.geometry
    layout = program_layout(data.app, geometry, len(data.labels), config.ngram)
    encoded = []
    for text_or_window, label in zip(data.train, data.train_labels):
        try:
            encoded.append((label, reference_vector(data.app, text_or_window, ctx, config.bundling, config.ngram)))
        except SentenceTooShortError:
            logger.warning(f"[TRAIN] Skipping training sentence shorter than {config.ngram} symbols")
    prototypes = train_prototypes(encoded, labels=data.labels, tie_seed=config.seed)
    image = AssociativeMemory(geometry)
    for row, label in enumerate(data.labels):
        image.write_row(row, prototypes[label])
    manifest = ImageManifest(
        app=data.app.value,
        d=geometry.d,
        k=geometry.k,
        am_rows=geometry.am_rows,
        labels=data.labels,
        class_count=layout.classes,
        seed=config.seed,
        seed_constants_version=ctx.constants.version,
        ngram=config.ngram if data.app is Application.LANG else None,
        bundling=config.bundling.value,
    )
    logger.info(f"[TRAIN] {data.app.value}: {len(encoded)} examples into {len(data.labels)} prototypes")
    return image, manifest


def calibrate_image(
    recording: BearingRecording,
    ctx: EncoderContext,
    config: RunConfig,
    mode: Optional[BundlingMode] = None,
) -> tuple[AssociativeMemory, ImageManifest, bearing.BearingModel]:
    indices = select_hours(recording, 0.0, config.calibrate_hours)
    model = bearing.calibrate_bearing(
        records_data(recording, indices),
        ctx,
        seed=config.seed,
        mode=mode or config.bundling,
        half_life_hours=config.ema_half_life_hours,
    )
    image = AssociativeMemory(ctx.geometry)
    image.write_row(0, bearing.complement_prototype(model))
    g = ctx.geometry
    manifest = ImageManifest(
        app=Application.BEARING.value,
        d=g.d,
        k=g.k,
        am_rows=g.am_rows,
        labels=["reference"],
        class_count=1,
        seed=config.seed,
        seed_constants_version=ctx.constants.version,
        bundling=(mode or config.bundling).value,
        norm_factor=model.norm_factor,
        alarm_distance=int(np.floor(model.alarm_distance)),
    )
    return image, manifest, model


# --- clasificacion ---------------------------------------------------------------

def _nearest(query: HyperVector, prototypes: list[HyperVector]) -> SearchResult:
    return lang.nearest_prototype(query, prototypes)


def _vm_lang(items: list[list[int]], ctx: EncoderContext, image, manifest, config: RunConfig) -> list:
    """Un programa por longitud de frase; resultados devueltos en el orden de los items."""
    results: list = [None] * len(items)
    by_length: dict[int, list[int]] = {}
    for index, stream in enumerate(items):
        by_length.setdefault(len(stream), []).append(index)
    for length, indices in sorted(by_length.items()):
        program = build_application_program(
            Application.LANG, ctx.geometry, classes=manifest.class_count, ngram=config.ngram, length=length
        )
        runner = AcceleratorRunner(ctx, program, image, workers=config.workers, max_cycles=config.max_cycles)
        for index, run in zip(indices, runner.run_batch([items[i] for i in indices])):
            results[index] = run
    return results


def classify_items(
    data: LabeledItems,
    ctx: EncoderContext,
    image: AssociativeMemory,
    manifest: ImageManifest,
    config: RunConfig,
    via: Union[Via, str] = Via.VM,
    compare: bool = False,
) -> tuple[list[ClassificationRow], ClassificationSummary]:
    via = Via(via)
    app = data.app
    if manifest.app != app.value:
        raise DataFormatError(manifest.app, f"image was trained for {manifest.app}, not {app.value}")
    mode = BundlingMode(manifest.bundling)
    prototypes = prototypes_of(image, manifest)
    ngram = manifest.ngram or config.ngram

    kept: list[int] = []
    for index, item in enumerate(data.test):
        if app is Application.LANG and len(lang.symbols_of(item)) < ngram:
            logger.warning(f"[CLASSIFY] Item {index}: sentence shorter than {ngram} symbols, skipped")
            continue
        kept.append(index)

    reference: dict[int, SearchResult] = {}
    if via is Via.REFERENCE or compare:
        for index in kept:
            reference[index] = _nearest(reference_vector(app, data.test[index], ctx, mode, ngram), prototypes)

    vm_results: dict[int, tuple[SearchResult, int]] = {}
    if via is Via.VM:
        streams = [item_stream(app, data.test[i]) for i in kept]
        if app is Application.LANG:
            runs = _vm_lang(streams, ctx, image, manifest, config.model_copy(update={"ngram": ngram}))
        else:
            program = build_application_program(app, ctx.geometry, classes=manifest.class_count)
            runs = AcceleratorRunner(
                ctx, program, image, workers=config.workers, max_cycles=config.max_cycles
            ).run_batch(streams)
        for index, run in zip(kept, runs):
            vm_results[index] = (SearchResult(run.index, run.distance), run.report.cycles)

    rows = []
    mismatches = 0
    for index in kept:
        if via is Via.VM:
            result, cycles = vm_results[index]
        else:
            result, cycles = reference[index], 0
        if compare and reference[index].index != result.index:
            mismatches += 1
            logger.warning(
                f"[CLASSIFY] Item {index}: vm picked {result.index}, reference picked {reference[index].index}"
            )
        rows.append(ClassificationRow(
            item=index,
            truth=data.test_labels[index],
            pred=manifest.labels[result.index],
            distance=result.distance,
            cycles=cycles,
        ))
        logger.debug(f"[CLASSIFY] Item {index}: {rows[-1].pred} at distance {result.distance}")

    correct = sum(1 for row in rows if row.truth == row.pred)
    summary = ClassificationSummary(
        app=app.value,
        via=via.value,
        items=len(rows),
        accuracy=correct / len(rows) if rows else None,
        mean_cycles=float(np.mean([row.cycles for row in rows])) if rows and via is Via.VM else None,
        compared=compare,
        mismatches=mismatches,
    )
    logger.info(f"[CLASSIFY] {app.value} via {via.value}: {summary.items} items, accuracy={summary.accuracy}")
    if compare and mismatches:
        raise CompareMismatchError(f"{mismatches} of {len(rows)} decisions differ between vm and reference")
    return rows, summary


# --- monitor de rodamientos -------------------------------------------------

def monitor_bearing(
    recording: BearingRecording,
    ctx: EncoderContext,
    config: RunConfig,
    via: Union[Via, str] = Via.REFERENCE,
    threshold: Optional[float] = None,
) -> tuple[list[MonitorRow], bearing.BearingModel]:
    via = Via(via)
    # la VM acumula con contadores: se calibra con el mismo modelo
    mode = BundlingMode.COUNTER if via is Via.VM else config.bundling
    image, manifest, model = calibrate_image(recording, ctx, config, mode)
    d = ctx.geometry.d

    if via is Via.VM:
        # la fila de alarma se decide en el host; el intr solo despierta
        wake = max(model.alarm_distance, bearing.min_alarm_distance(d))
        if wake > model.alarm_distance:
            logger.warning(
                f"[BEARING] Alarm {model.alarm_distance:.1f} does not fit the 12-bit interrupt threshold at d={d}; "
                f"wake-up raised to {wake}"
            )
        program = build_application_program(Application.BEARING, ctx.geometry, alarm_distance=wake)
        runner = AcceleratorRunner(ctx, program, image, workers=config.workers, max_cycles=config.max_cycles)
        streams = [model.measurement_stream(record_samples(record)) for record in recording.records]
        raw = [d - run.distance for run in runner.run_batch(streams)]
    else:
        raw = []
        for record in recording.records:
            raw.append(model.distance(bearing.bearing_encode_reference(record_samples(record), model, ctx, mode)))

    limit = model.alarm_distance if threshold is None else threshold
    ema = bearing.ema_filter(recording.hours(), raw, config.ema_half_life_hours)
    rows = [
        MonitorRow(
            timestamp=record.timestamp.isoformat(),
            raw_distance=int(distance),
            ema_distance=float(smoothed),
            alarm=bool(smoothed > limit),
        )
        for record, distance, smoothed in zip(recording.records, raw, ema)
    ]
    alarms = sum(row.alarm for row in rows)
    logger.info(f"[BEARING] Monitored {len(rows)} records via {via.value}: {alarms} in alarm (threshold {limit:.1f})")
    return rows, model


# --- barrido de geometrias ----------------------------------------------------

BENCH_LANG_SENTENCES = 20
BENCH_EMG_WINDOWS = 10


def bench_point(app: Union[Application, str], geometry: Geometry, constants: SeedConstants, config: RunConfig) -> BenchRow:
    """Precision de referencia en modo contador (igual a la VM) y ciclos medidos en la VM."""
    app = Application(app)
    ctx = EncoderContext(geometry, constants)
    point = config.model_copy(update={"d": geometry.d, "k": geometry.k, "bundling": BundlingMode.COUNTER})
    accuracy = None
    window = None
    if app is Application.BEARING:
        # los ciclos no dependen de los datos: basta un registro y una referencia cualquiera
        samples = synth_bearing(0.0, config.seed, 1).records[0].data
        model = bearing.BearingModel(norm_factor=float(np.quantile(np.abs(samples), bearing.NORM_QUANTILE)))
        stream = model.measurement_stream(samples)
        layout = program_layout(app, geometry)
        program = build_application_program(app, geometry)
        image = AssociativeMemory(geometry)
        image.write_row(0, random_vector(geometry.d, config.seed))
        window = bearing.BEARING_WINDOW_SECONDS
    else:
        if app is Application.LANG:
            corpus = synth_lang(SYNTH_LANGUAGES, BENCH_LANG_SENTENCES, config.seed)
            data = LabeledItems(
                app, corpus.labels,
                [s.text for s in corpus.train], [s.label for s in corpus.train],
                [s.text for s in corpus.test], [s.label for s in corpus.test],
            )
        else:
            data = load_labeled_items(app, SYNTH_KEYWORD, config.seed)
            keep = BENCH_EMG_WINDOWS * SYNTH_GESTURES
            data.test, data.test_labels = data.test[:keep], data.test_labels[:keep]
            window = emg.EMG_WINDOW_SECONDS
        image, manifest = train_image(data, ctx, point)
        _, summary = classify_items(data, ctx, image, manifest, point, via=Via.REFERENCE)
        accuracy = summary.accuracy
        stream = item_stream(app, data.test[0])
        layout = program_layout(app, geometry, manifest.class_count, point.ngram)
        options = {"length": len(stream), "ngram": point.ngram} if app is Application.LANG else {}
        program = build_application_program(app, geometry, classes=manifest.class_count, **options)
    run = AcceleratorRunner(ctx, program, image, workers=1, max_cycles=config.max_cycles).run_item(0, stream)
    row = BenchRow(
        app=app.value,
        d=geometry.d,
        k=geometry.k,
        accuracy=accuracy,
        cycles_per_classification=run.report.cycles,
        realtime_freq_hz=bearing.realtime_frequency(run.report.cycles, window) if window else None,
        program_words=len(program),
        vector_slots=layout.vector_slots,
    )
    logger.info(f"[BENCH] {app.value} d={geometry.d} k={geometry.k}: {row.cycles_per_classification} cycles")
    return row


def bench(
    app: Union[Application, str],
    dims: Sequence[int],
    folds: Sequence[int],
    constants: SeedConstants,
    config: RunConfig,
) -> list[BenchRow]:
    rows = []
    for d in dims:
        for k in folds:
            try:
                geometry = Geometry(d=d, k=k, am_rows=config.am_rows)
            except GeometryError as exc:
                raise UsageError(f"bench point d={d} k={k}: {exc}")
            rows.append(bench_point(app, geometry, constants, config))
    if not rows:
        raise InsufficientDataError("bench needs at least one dimension and one fold")
    return rows
