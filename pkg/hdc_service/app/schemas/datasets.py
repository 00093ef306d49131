from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class LabeledSentence(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    text: str


class TextCorpus(BaseModel):
    model_config = ConfigDict(frozen=True)

    labels: list[str]
    train: list[LabeledSentence] = Field(default_factory=list)
    test: list[LabeledSentence] = Field(default_factory=list)

    def label_counts(self, split: str = "train") -> dict[str, int]:
        counts = {label: 0 for label in self.labels}
        for sentence in getattr(self, split):
            counts[sentence.label] += 1
        return counts


class EmgRecording(BaseModel):
    """Ventanas (n, 5, 64) de muestras en [0, 127] con su gesto."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    labels: list[str]
    windows: np.ndarray
    window_labels: list[str]

    def __len__(self) -> int:
        return len(self.window_labels)


class BearingRecord(BaseModel):
    """Un registro de 1 s; sin `data` las muestras se leen de `path` al pedirlas."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    timestamp: datetime
    path: Optional[Path] = None
    channel: int = 0
    data: Optional[np.ndarray] = Field(default=None, repr=False)


class BearingRecording(BaseModel):
    model_config = ConfigDict(frozen=True)

    sample_rate_hz: int = 20_000
    records: list[BearingRecord] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def hours(self) -> np.ndarray:
        if not self.records:
            return np.zeros(0)
        start = self.records[0].timestamp
        return np.array([(r.timestamp - start).total_seconds() / 3600.0 for r in self.records])
