from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional

from pydantic import BaseModel, ValidationError, model_validator

from app.core.config import Settings, settings
from app.core.constants import iter_key_values
from app.core.errors import DataFormatError, GeometryError, UsageError
from app.models.hypervector import Geometry


class Application(str, Enum):
    LANG = "lang"
    EMG = "emg"
    BEARING = "bearing"


class BundlingMode(str, Enum):
    EXACT = "exact"
    COUNTER = "counter"


class Via(str, Enum):
    VM = "vm"
    REFERENCE = "reference"


class RunConfig(BaseModel):
    """Configuracion resuelta de una ejecucion: flags > fichero > entorno > defaults."""

    app: Optional[Application] = None
    d: int = 2048
    k: int = 1
    am_rows: int = 32
    seed: int = 0
    seed_file: Optional[Path] = None
    ngram: int = 5
    bundling: BundlingMode = BundlingMode.EXACT
    interrupt_policy: str = "auto_ack"
    max_cycles: int = 10_000_000
    workers: int = 1
    dataset: Optional[Path] = None
    output: Optional[Path] = None
    ema_half_life_hours: float = 5.0
    calibrate_hours: float = 24.0
    deterministic: bool = False

    @model_validator(mode="after")
    def _check(self) -> "RunConfig":
        try:
            Geometry(d=self.d, k=self.k, am_rows=self.am_rows)
        except GeometryError as exc:
            raise ValueError(str(exc))
        if self.ngram < 1:
            raise ValueError(f"ngram must be >= 1, got {self.ngram}")
        if self.interrupt_policy not in ("auto_ack", "block"):
            raise ValueError(f"interrupt_policy must be auto_ack or block, got {self.interrupt_policy!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.ema_half_life_hours <= 0:
            raise ValueError("ema_half_life_hours must be positive")
        return self

    @property
    def geometry(self) -> Geometry:
        return Geometry(d=self.d, k=self.k, am_rows=self.am_rows)

    @staticmethod
    def defaults_from(source: Settings) -> dict[str, Any]:
        return {
            "d": source.dim,
            "k": source.fold,
            "am_rows": source.am_rows,
            "seed": source.seed,
            "seed_file": source.seed_file,
            "interrupt_policy": source.interrupt_policy,
            "max_cycles": source.max_cycles,
            "workers": source.workers,
            "ema_half_life_hours": source.ema_half_life_hours,
            "calibrate_hours": source.calibrate_hours,
            "deterministic": source.deterministic,
        }

    @staticmethod
    def read_config_file(path: Path) -> dict[str, str]:
        path = Path(path)
        if not path.exists():
            raise DataFormatError(path, "config file not found")
        values = {}
        for lineno, key, value in iter_key_values(path.read_text(encoding="utf-8"), path):
            if key not in RunConfig.model_fields:
                raise DataFormatError(path, f"unknown config key {key!r}", line=lineno)
            values[key] = value
        return values

    @classmethod
    def resolve(
        cls,
        flags: Optional[Mapping[str, Any]] = None,
        config_file: Optional[Path] = None,
        base: Optional[Settings] = None,
    ) -> "RunConfig":
        values = cls.defaults_from(base or settings)
        if config_file is not None:
            values.update(cls.read_config_file(config_file))
        values.update({key: value for key, value in (flags or {}).items() if value is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            problems = "; ".join(error["msg"] for error in exc.errors())
            raise UsageError(f"invalid configuration: {problems}")
