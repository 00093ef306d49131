"""Punto de entrada: `python -m app.main <comando>`."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from app.api.v1.api import COMMANDS
from app.core.config import settings
from app.core.errors import EXIT_USAGE, HdcError, UsageError
from app.core.logging_config import configure_logging
from app.schemas.run_config import Application, BundlingMode, RunConfig, Via

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Los errores de uso suben como UsageError (salida 1) en vez de SystemExit(2)."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdc", description=f"{settings.project_name} {settings.version}")
    parser.add_argument("--config", help="key=value file with RunConfig fields")
    parser.add_argument("--log-level", type=str.upper, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG logging and tracebacks")
    parser.add_argument("--deterministic", action="store_true", default=None, help="drop timestamps from logs")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--dim", type=int, dest="d")
    parser.add_argument("--fold", type=int, dest="k")
    parser.add_argument("--am-rows", type=int, dest="am_rows")
    parser.add_argument("--seed", type=int)
    commands = parser.add_subparsers(dest="command", required=True)

    asm = commands.add_parser("asm", help="assemble a .hdc listing into a program binary")
    asm.add_argument("input")
    asm.add_argument("output")

    disasm = commands.add_parser("disasm", help="print the listing of a program binary")
    disasm.add_argument("input")
    disasm.add_argument("--out")

    run = commands.add_parser("run", help="execute a program on the virtual machine")
    run.add_argument("program", help=".hdc, .bin or lang/emg/bearing")
    run.add_argument("--input", help="raw sample bytes, one 7-bit sample per byte")
    run.add_argument("--text", help="LANG sentence fed as symbol indices")
    run.add_argument("--am-image")
    run.add_argument("--trace", help="CSV with one row per retired instruction")
    run.add_argument("--max-cycles", type=int)
    run.add_argument("--policy", choices=["auto_ack", "block"])
    run.add_argument("--ngram", type=int)

    train = commands.add_parser("train", help="train prototypes and write an AM image")
    train.add_argument("app", choices=[a.value for a in Application])
    train.add_argument("dataset", help="dataset path or 'synth'")
    train.add_argument("output")
    train.add_argument("--ngram", type=int)
    train.add_argument("--bundling", choices=[m.value for m in BundlingMode])
    train.add_argument("--calibrate-hours", type=float)

    classify = commands.add_parser("classify", help="classify a dataset against an AM image")
    classify.add_argument("app", choices=[Application.LANG.value, Application.EMG.value])
    classify.add_argument("dataset")
    classify.add_argument("image")
    classify.add_argument("--via", choices=[v.value for v in Via], default=Via.VM.value)
    classify.add_argument("--compare", action="store_true")
    classify.add_argument("--out")

    monitor = commands.add_parser("bearing-monitor", help="distance trend of a bearing recording")
    monitor.add_argument("dataset", help="IMS directory or 'synth'")
    monitor.add_argument("--channel", type=int, default=0)
    monitor.add_argument("--calibrate-hours", type=float)
    monitor.add_argument("--half-life", type=float, dest="ema_half_life_hours")
    monitor.add_argument("--threshold", type=float)
    monitor.add_argument("--via", choices=[v.value for v in Via], default=Via.REFERENCE.value)
    monitor.add_argument("--bundling", choices=[m.value for m in BundlingMode])
    monitor.add_argument("--out")

    sweep = commands.add_parser("bench", help="accuracy and cycles over a geometry sweep")
    sweep.add_argument("app", choices=[a.value for a in Application])
    sweep.add_argument("--dims", default="512,2048,8192")
    sweep.add_argument("--folds", default="1,2,4")
    sweep.add_argument("--out")
    return parser


_CONFIG_FLAGS = (
    "d", "k", "am_rows", "seed", "workers", "deterministic", "ngram", "bundling",
    "calibrate_hours", "ema_half_life_hours", "max_cycles",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    flags = {name: getattr(args, name, None) for name in _CONFIG_FLAGS}
    flags["interrupt_policy"] = getattr(args, "policy", None)
    if getattr(args, "app", None):
        flags["app"] = args.app
    return RunConfig.resolve(flags, args.config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    verbose = False
    try:
        args = build_parser().parse_args(argv)
        verbose = args.verbose
        level = "DEBUG" if verbose else (args.log_level or settings.log_level)
        config = resolve_config(args)
        configure_logging(level, config.deterministic)
        logger.debug(f"[CLI] {args.command} with {config.model_dump(exclude_none=True)}")
        return COMMANDS[args.command](args, config)
    except HdcError as exc:
        if not logging.getLogger("app").handlers:
            configure_logging(settings.log_level, settings.deterministic)
        logger.error(f"[CLI] {exc}", exc_info=verbose)
        return exc.exit_code
    except KeyboardInterrupt:
        logger.error("[CLI] Interrupted")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
