"""Estado de la maquina: programa, AM, encoder, bucles, contadores y flujo de entrada."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional

from app.core.errors import DataFormatError, OperandRangeError, StreamUnderrunError
from app.models.encoder import EncoderState
from app.models.instruction import Program
from app.models.memory import AssociativeMemory, SearchResult

if TYPE_CHECKING:
    from app.schemas.reports import InterruptEvent

SAMPLE_MAX = 127


class InputStream:
    """Muestras de 7 bits del host, consumidas estrictamente en orden."""

    __slots__ = ("_samples", "position")

    def __init__(self, samples: Iterable[int] = ()):
        samples = tuple(int(s) for s in samples)
        for index, sample in enumerate(samples):
            if not 0 <= sample <= SAMPLE_MAX:
                raise OperandRangeError(f"sample {index} = {sample} outside [0, {SAMPLE_MAX}]")
        self._samples = samples
        self.position = 0

    @classmethod
    def from_bytes(cls, data: bytes) -> "InputStream":
        return cls(byte & SAMPLE_MAX for byte in data)

    @classmethod
    def from_file(cls, path: Path) -> "InputStream":
        path = Path(path)
        if not path.exists():
            raise DataFormatError(path, "input stream file not found")
        return cls.from_bytes(path.read_bytes())

    def next(self) -> int:
        if self.position >= len(self._samples):
            raise StreamUnderrunError(f"input stream exhausted after {len(self._samples)} samples")
        sample = self._samples[self.position]
        self.position += 1
        return sample

    @property
    def samples(self) -> tuple[int, ...]:
        return self._samples

    @property
    def remaining(self) -> int:
        return len(self._samples) - self.position

    def __len__(self) -> int:
        return len(self._samples)


@dataclass
class LoopFrame:
    start: int
    end: int
    remaining: int


@dataclass
class MachineState:
    program: Program
    am: AssociativeMemory
    enc: EncoderState
    pc: int = 0
    part_counter: int = 0
    loop_stack: list[LoopFrame] = field(default_factory=list)
    cycles: int = 0
    retired: int = 0
    pending_interrupt: Optional["InterruptEvent"] = None
    last_search: Optional[SearchResult] = None
    latched_sample: Optional[int] = None
    halted: bool = False

    @property
    def geometry(self):
        return self.am.geometry
