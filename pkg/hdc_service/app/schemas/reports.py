from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.models.memory import SearchResult


class RunStatus(str, Enum):
    HALTED = "halted"
    CYCLE_LIMIT = "cycle_limit"
    BLOCKED = "blocked"


class InterruptPolicy(str, Enum):
    AUTO_ACK = "auto_ack"
    BLOCK = "block"


class SearchSummary(BaseModel):
    index: int
    distance: int

    @classmethod
    def from_result(cls, result: Optional[SearchResult]) -> Optional["SearchSummary"]:
        if result is None:
            return None
        return cls(index=result.index, distance=result.distance)


class InterruptEvent(BaseModel):
    cycle: int
    pc: int
    index: int
    distance: int
    sim_threshold: int
    index_threshold: int

    @property
    def result(self) -> SearchResult:
        return SearchResult(index=self.index, distance=self.distance)


class StepReport(BaseModel):
    pc: int
    mnemonic: str
    cycles: int
    interrupt: Optional[InterruptEvent] = None


class RunReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: RunStatus
    cycles: int
    retired: int
    interrupts: list[InterruptEvent] = Field(default_factory=list)
    last_search: Optional[SearchSummary] = None
    final_state: Any = Field(default=None, exclude=True)


class ClassificationRow(BaseModel):
    item: int
    truth: str
    pred: str
    distance: int
    cycles: int


class ClassificationSummary(BaseModel):
    app: str
    via: str
    items: int
    accuracy: Optional[float]
    mean_cycles: Optional[float]
    compared: bool = False
    mismatches: int = 0


class MonitorRow(BaseModel):
    timestamp: str
    raw_distance: int
    ema_distance: float
    alarm: bool


class BenchRow(BaseModel):
    app: str
    d: int
    k: int
    accuracy: Optional[float]
    cycles_per_classification: int
    realtime_freq_hz: Optional[float]
    program_words: int
    vector_slots: int


class ImageManifest(BaseModel):
    app: str
    d: int
    k: int
    am_rows: int
    labels: list[str]
    class_count: int
    seed: int
    seed_constants_version: int
    ngram: Optional[int] = None
    bundling: str = "exact"
    norm_factor: Optional[float] = None
    alarm_distance: Optional[int] = None
