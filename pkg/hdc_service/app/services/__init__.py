from .assembler import assemble, disassemble
from .encoder_service import EncoderContext
from .vm_service import VirtualMachine

__all__ = ["EncoderContext", "VirtualMachine", "assemble", "disassemble"]
