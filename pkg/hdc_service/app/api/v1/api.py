"""Manejadores de comandos del CLI.

Cada `cmd_*` recibe los argumentos ya parseados y la RunConfig resuelta,
escribe sus artefactos (JSON por stdout, CSV a fichero o stdout) y
devuelve el codigo de salida. Los errores suben al router de `app.main`.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Iterable, Optional

import pandas as pd
from pydantic import BaseModel

from app.core.constants import load_seed_constants
from app.core.errors import EXIT_OK, CycleLimitError, DataFormatError, UsageError
from app.models.instruction import Program
from app.models.machine import InputStream
from app.schemas.reports import RunStatus
from app.schemas.run_config import Application, RunConfig, Via
from app.services.algos import lang
from app.services.algos.programs import build_application_program
from app.services.assembler import assemble, disassemble
from app.services.encoder_service import EncoderContext
from app.services.experiments_service import (
    bench,
    calibrate_image,
    classify_items,
    load_bearing_recording,
    load_image,
    load_labeled_items,
    monitor_bearing,
    save_image,
    train_image,
)
from app.services.isa_codec import read_program_binary, write_program_binary
from app.services.vm_service import TraceRecorder, VirtualMachine

logger = logging.getLogger(__name__)


def _context(config: RunConfig) -> EncoderContext:
    return EncoderContext(config.geometry, load_seed_constants(config.seed_file))


def _emit_json(payload) -> None:
    if isinstance(payload, BaseModel):
        sys.stdout.write(payload.model_dump_json(indent=2) + "\n")
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit_csv(rows: Iterable[BaseModel], columns: list[str], out: Optional[Path]) -> None:
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=columns)
    if out is None:
        frame.to_csv(sys.stdout, index=False)
        return
    frame.to_csv(out, index=False)
    logger.info(f"[CLI] Wrote {len(frame)} rows to {out}")


def _parse_ints(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")


# --- toolchain ---------------------------------------------------------------

def _read_source(path: Path) -> str:
    if not path.exists():
        raise UsageError(f"{path}: no such file")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(path, f"not valid UTF-8 text: {exc.reason}")


def cmd_asm(args, config: RunConfig) -> int:
    source = Path(args.input)
    program = assemble(_read_source(source))
    write_program_binary(program, Path(args.output))
    logger.info(f"[ASM] {source} -> {args.output}: {len(program)} words")
    return EXIT_OK


def cmd_disasm(args, config: RunConfig) -> int:
    text = disassemble(read_program_binary(Path(args.input)))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info(f"[ASM] Wrote listing to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _resolve_program(name: str, config: RunConfig, classes: Optional[int], length: Optional[int]) -> Program:
    path = Path(name)
    if path.suffix == ".hdc":
        return assemble(_read_source(path))
    if path.suffix == ".bin":
        return read_program_binary(path)
    try:
        app = Application(name)
    except ValueError:
        raise UsageError(f"program must be a .hdc file, a .bin file or one of lang, emg, bearing; got {name!r}")
    options = {"classes": classes} if classes is not None and app is not Application.BEARING else {}
    if app is Application.LANG:
        options["ngram"] = config.ngram
        if length is not None:
            options["length"] = length
    return build_application_program(app, config.geometry, **options)


def cmd_run(args, config: RunConfig) -> int:
    ctx = _context(config)
    image = None
    classes = None
    if args.am_image:
        image, manifest = load_image(Path(args.am_image))
        if image.geometry != config.geometry:
            raise UsageError(
                f"image geometry d={image.geometry.d} k={image.geometry.k} disagrees with d={config.d} k={config.k}"
            )
        classes = manifest.class_count

    if args.input and args.text is not None:
        raise UsageError("--input and --text are mutually exclusive")
    if args.text is not None:
        samples = [int(s) for s in lang.truncate_sentence(lang.symbols_of(args.text))]
    elif args.input:
        samples = list(InputStream.from_file(Path(args.input)).samples)
    else:
        samples = []
    program = _resolve_program(args.program, config, classes, len(samples) if args.text is not None else None)

    tracer = TraceRecorder() if args.trace else None
    vm = VirtualMachine(ctx, args.policy or config.interrupt_policy, tracer)
    state = vm.new_state(program)
    if image is not None:
        vm.load_prototypes(state, image)
    # una pasada del flujo por parte del vector
    stream = InputStream(samples * config.geometry.k)

    limit = args.max_cycles or config.max_cycles
    report = vm.run(state, stream, limit)
    interrupts = list(report.interrupts)
    while report.status is RunStatus.BLOCKED:
        vm.ack_interrupt(state)
        report = vm.run(state, stream, limit - state.cycles)
        interrupts.extend(report.interrupts)

    if tracer is not None:
        tracer.write_csv(Path(args.trace))
    summary = {
        "status": report.status.value,
        "cycles": state.cycles,
        "retired": state.retired,
        "program_words": len(program),
        "interrupts": [event.model_dump() for event in interrupts],
        "last_search": (
            {"index": state.last_search.index, "distance": state.last_search.distance}
            if state.last_search is not None else None
        ),
    }
    _emit_json(summary)
    logger.info(f"[VM] {args.program}: {report.status.value} after {state.cycles} cycles")
    if report.status is RunStatus.CYCLE_LIMIT:
        raise CycleLimitError(f"cycle limit of {limit} reached before halt")
    return EXIT_OK


# --- experimentos ----------------------------------------------------------------

def cmd_train(args, config: RunConfig) -> int:
    app = Application(args.app)
    ctx = _context(config)
    out = Path(args.output)
    if app is Application.BEARING:
        recording = load_bearing_recording(args.dataset, config.seed)
        image, manifest, _ = calibrate_image(recording, ctx, config)
    else:
        data = load_labeled_items(app, args.dataset, config.seed)
        image, manifest = train_image(data, ctx, config)
    save_image(image, manifest, out)
    _emit_json(manifest)
    return EXIT_OK


def cmd_classify(args, config: RunConfig) -> int:
    app = Application(args.app)
    image, manifest = load_image(Path(args.image))
    config = config.model_copy(update={"d": image.geometry.d, "k": image.geometry.k, "am_rows": image.geometry.am_rows})
    ctx = _context(config)
    data = load_labeled_items(app, args.dataset, manifest.seed)
    rows, summary = classify_items(data, ctx, image, manifest, config, via=Via(args.via), compare=args.compare)
    if args.out:
        _emit_csv(rows, ["item", "truth", "pred", "distance", "cycles"], Path(args.out))
    _emit_json(summary)
    return EXIT_OK


def cmd_bearing_monitor(args, config: RunConfig) -> int:
    ctx = _context(config)
    recording = load_bearing_recording(args.dataset, config.seed, args.channel)
    rows, model = monitor_bearing(recording, ctx, config, via=Via(args.via), threshold=args.threshold)
    _emit_csv(rows, ["timestamp", "raw_distance", "ema_distance", "alarm"], Path(args.out) if args.out else None)
    if args.out:
        _emit_json({
            "records": len(rows),
            "alarms": sum(row.alarm for row in rows),
            "norm_factor": model.norm_factor,
            "calibration_mean": model.calibration_mean,
            "calibration_std": model.calibration_std,
            "alarm_distance": model.alarm_distance if args.threshold is None else args.threshold,
        })
    return EXIT_OK


def cmd_bench(args, config: RunConfig) -> int:
    dims = _parse_ints(args.dims, "--dims")
    folds = _parse_ints(args.folds, "--folds")
    rows = bench(args.app, dims, folds, load_seed_constants(config.seed_file), config)
    columns = [
        "app", "d", "k", "accuracy", "cycles_per_classification",
        "realtime_freq_hz", "program_words", "vector_slots",
    ]
    _emit_csv(rows, columns, Path(args.out) if args.out else None)
    return EXIT_OK


COMMANDS = {
    "asm": cmd_asm,
    "disasm": cmd_disasm,
    "run": cmd_run,
    "train": cmd_train,
    "classify": cmd_classify,
    "bearing-monitor": cmd_bearing_monitor,
    "bench": cmd_bench,
}
