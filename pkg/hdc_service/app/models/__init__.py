from .hypervector import Geometry, HyperVector, Permutation
from .machine import InputStream, MachineState
from .memory import AssociativeMemory, SearchResult

__all__ = [
    "AssociativeMemory",
    "Geometry",
    "HyperVector",
    "InputStream",
    "MachineState",
    "Permutation",
    "SearchResult",
]
