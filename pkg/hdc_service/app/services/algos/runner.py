"""Lotes de ejecuciones de la VM, un MachineState nuevo por item.

Los hilos del pool comparten el EncoderContext (con sus caches) y la imagen
de AM congelada sin copiarlos. El bucle de la VM es Python puro y retiene el
GIL: solo las operaciones numpy sobre vectores anchos corren en paralelo, asi
que `workers` acota la concurrencia pero no escala como un pool de procesos.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from app.core.config import settings
from app.core.errors import CycleLimitError
from app.models.instruction import Program
from app.models.machine import InputStream
from app.models.memory import AssociativeMemory
from app.schemas.reports import InterruptPolicy, RunReport, RunStatus
from app.services.encoder_service import EncoderContext
from app.services.vm_service import VirtualMachine

logger = logging.getLogger(__name__)


@dataclass
class ItemRun:
    item: int
    report: RunReport

    @property
    def index(self) -> Optional[int]:
        return self.report.last_search.index if self.report.last_search else None

    @property
    def distance(self) -> Optional[int]:
        return self.report.last_search.distance if self.report.last_search else None


class AcceleratorRunner:
    """Ejecuta un programa sobre muchos items, cada uno con su propio MachineState.

    La imagen de AM se copia (filas de prototipos) en cada estado nuevo; el
    flujo de entrada se repite K veces, una por parte del vector.
    """

    def __init__(
        self,
        context: EncoderContext,
        program: Program,
        image: Optional[AssociativeMemory] = None,
        workers: Optional[int] = None,
        policy: Union[InterruptPolicy, str] = InterruptPolicy.AUTO_ACK,
        max_cycles: Optional[int] = None,
    ):
        self.context = context
        self.program = program
        self.image = image.snapshot() if image is not None else None
        self.workers = workers or settings.workers
        self.policy = InterruptPolicy(policy)
        self.max_cycles = max_cycles or settings.max_cycles

    def run_item(self, item: int, samples: Sequence[int]) -> ItemRun:
        vm = VirtualMachine(self.context, self.policy)
        state = vm.new_state(self.program)
        if self.image is not None:
            vm.load_prototypes(state, self.image)
        stream = InputStream(list(samples) * self.context.geometry.k)
        report = vm.run(state, stream, self.max_cycles)
        if report.status is RunStatus.CYCLE_LIMIT:
            raise CycleLimitError(f"item {item}: cycle limit of {self.max_cycles} reached")
        logger.debug(f"[VM] Item {item}: {report.cycles} cycles, search={report.last_search}")
        return ItemRun(item=item, report=report)

    def run_batch(self, streams: Sequence[Sequence[int]]) -> list[ItemRun]:
        """Resultados en el orden de los items, sea cual sea el orden de termino."""
        if self.workers == 1:
            return [self.run_item(i, s) for i, s in enumerate(streams)]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self.run_item, i, s) for i, s in enumerate(streams)]
            runs = [future.result() for future in futures]
        return sorted(runs, key=lambda run: run.item)
