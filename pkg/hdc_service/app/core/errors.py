"""Jerarquia de errores del modelo del acelerador.

Cada error lleva el codigo de salida que el CLI devuelve al capturarlo.
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_COMPARE = 3
EXIT_CYCLE_LIMIT = 4


class HdcError(Exception):
    exit_code = EXIT_DATA


class UsageError(HdcError):
    exit_code = EXIT_USAGE


# hv-core / encoder

class GeometryError(HdcError, ValueError):
    pass


class WidthMismatchError(HdcError, ValueError):
    def __init__(self, left: int, right: int):
        super().__init__(f"width mismatch: {left} != {right}")
        self.left = left
        self.right = right


class OperandRangeError(HdcError, ValueError):
    pass


class SeedRejectedError(HdcError, ValueError):
    pass


class UnknownOpcodeError(HdcError, ValueError):
    pass


# am

class AddressError(HdcError, IndexError):
    pass


# isa

class FieldOverflowError(HdcError, ValueError):
    def __init__(self, field: str, value: int, bits: int):
        super().__init__(f"field {field}={value} does not fit in {bits} bits")
        self.field = field
        self.value = value
        self.bits = bits


class DecodeError(HdcError, ValueError):
    pass


class ProgramFormatError(HdcError, ValueError):
    pass


class AssemblyError(HdcError, ValueError):
    def __init__(self, line: Optional[int], message: str):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.message = message


class UndefinedLabelError(AssemblyError):
    pass


class LoopNestingError(AssemblyError):
    pass


class EmptyProgramError(AssemblyError):
    pass


# vm

class VMError(HdcError, RuntimeError):
    pass


class StreamUnderrunError(VMError):
    pass


class LoopStackOverflowError(VMError):
    pass


class InvalidPcError(VMError):
    pass


class InterruptPendingError(VMError):
    pass


class NoPendingInterruptError(VMError):
    pass


class HostWriteError(VMError):
    pass


class CycleLimitError(VMError):
    exit_code = EXIT_CYCLE_LIMIT


# algos / datasets

class IllegalSymbolError(HdcError, ValueError):
    pass


class SentenceTooShortError(HdcError, ValueError):
    pass


class ShapeError(HdcError, ValueError):
    pass


class ModelNotCalibratedError(HdcError, RuntimeError):
    pass


class InsufficientDataError(HdcError, ValueError):
    pass


class NonMonotonicTimeError(HdcError, ValueError):
    pass


class DataFormatError(HdcError, ValueError):
    def __init__(self, path, message: str, line: Optional[int] = None):
        where = f"{path}:{line}" if line is not None else f"{path}"
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line
        self.message = message


# cli

class CompareMismatchError(HdcError):
    exit_code = EXIT_COMPARE
