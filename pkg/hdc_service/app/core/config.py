from pathlib import Path
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    project_name: str = "HDC Accelerator Model"
    version: str = "1.0.0"

    # Geometria por defecto: "32 x 2048 bit"
    dim: int = 2048
    fold: int = 1
    am_rows: int = 32

    # Semillas
    seed_file: Optional[Path] = None
    seed: int = 0

    # VM
    interrupt_policy: str = "auto_ack"
    max_cycles: int = 10_000_000

    # Runtime
    workers: int = 1
    log_level: str = "INFO"
    deterministic: bool = False

    # Monitor de rodamientos
    ema_half_life_hours: float = 5.0
    calibrate_hours: float = 24.0

    model_config = SettingsConfigDict(env_prefix="HDC_", env_file=".env", extra="ignore")

    @field_validator("interrupt_policy")
    @classmethod
    def _check_policy(cls, value: str) -> str:
        if value not in ("auto_ack", "block"):
            raise ValueError(f"interrupt_policy must be auto_ack or block, got {value!r}")
        return value

    @field_validator("workers")
    @classmethod
    def _check_workers(cls, value: int) -> int:
        if value < 1:
            raise ValueError("workers must be >= 1")
        return value


settings = Settings()
