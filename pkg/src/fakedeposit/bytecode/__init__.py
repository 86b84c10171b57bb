"""Decoding, sectioning and authoring of EVM bytecode."""
from .asm import AsmError, FixtureImage, assemble, assemble_fixture, format_asm
from .disasm import Instruction, InstructionStream, disassemble, parse_hex
from .keccak import keccak256
from .sections import CodeSections, SectionError, find_metadata, split_sections, strip_metadata
from .selectors import ERC20, FALLBACK, Selector, dispatch_selectors, extract_selectors

__all__ = [
    "AsmError", "CodeSections", "ERC20", "FALLBACK", "FixtureImage", "Instruction",
    "InstructionStream", "SectionError", "Selector", "assemble", "assemble_fixture",
    "disassemble", "dispatch_selectors", "extract_selectors", "find_metadata",
    "format_asm", "keccak256", "parse_hex", "split_sections", "strip_metadata",
]
