"""Carga del fichero de constantes (key=value) con las semillas por defecto."""
import logging
from pathlib import Path
from typing import Iterator, Optional

from pydantic import BaseModel

from app.core.config import settings
from app.core.errors import DataFormatError

logger = logging.getLogger(__name__)

DEFAULT_CONSTANTS_FILE = Path(__file__).with_name("constants.txt")


class SeedConstants(BaseModel):
    version: int
    seed_vector: int
    pi0: int
    pi1: int
    manipulator: int

    model_config = {"frozen": True}


def iter_key_values(text: str, source) -> Iterator[tuple[int, str, str]]:
    """Recorre texto key=value; `#` comenta, lineas vacias se ignoran."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataFormatError(source, f"expected key=value, got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise DataFormatError(source, "empty key", line=lineno)
        yield lineno, key, value


def parse_key_value(text: str, source) -> dict[str, str]:
    return {key: value for _, key, value in iter_key_values(text, source)}


def load_seed_constants(path: Optional[Path] = None) -> SeedConstants:
    path = Path(path or settings.seed_file or DEFAULT_CONSTANTS_FILE)
    if not path.exists():
        raise DataFormatError(path, "seed constants file not found")
    values = parse_key_value(path.read_text(encoding="utf-8"), path)
    parsed = {}
    for key in SeedConstants.model_fields:
        if key not in values:
            raise DataFormatError(path, f"missing key {key!r}")
        try:
            parsed[key] = int(values[key], 0)
        except ValueError:
            raise DataFormatError(path, f"key {key!r} is not an integer: {values[key]!r}")
    constants = SeedConstants(**parsed)
    logger.debug(f"[SEEDS] Loaded seed constants v{constants.version} from {path}")
    return constants
