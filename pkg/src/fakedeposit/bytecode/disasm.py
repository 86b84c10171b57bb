from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .opcodes import OpInfo, info


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    immediate: bytes | None = None
    truncated: bool = False

    @property
    def op(self) -> OpInfo:
        return info(self.opcode)

    @property
    def name(self) -> str:
        return self.op.name

    @property
    def size(self) -> int:
        return 1 + (len(self.immediate) if self.immediate is not None else 0)

    @property
    def next_offset(self) -> int:
        return self.offset + self.size

    @property
    def push_value(self) -> int | None:
        if self.immediate is None:
            return None
        return int.from_bytes(self.immediate, "big")

    @property
    def is_invalid(self) -> bool:
        return self.name.startswith("INVALID")

    def __str__(self) -> str:
        if self.immediate is None:
            return self.name
        return f"{self.name} 0x{self.immediate.hex()}"


@dataclass(frozen=True)
class InstructionStream:
    code: bytes
    instructions: tuple[Instruction, ...]

    @cached_property
    def jumpdests(self) -> frozenset[int]:
        return frozenset(i.offset for i in self.instructions if i.opcode == 0x5B)

    @cached_property
    def by_offset(self) -> dict[int, Instruction]:
        return {i.offset: i for i in self.instructions}

    def __iter__(self):
        return iter(self.instructions)

    def __len__(self) -> int:
        return len(self.instructions)

    def at(self, offset: int) -> Instruction | None:
        return self.by_offset.get(offset)

    def listing(self) -> str:
        return "\n".join(f"{i.offset:04x}: {i}" for i in self.instructions)


def disassemble(code: bytes) -> InstructionStream:
    """Decode every byte of `code`.

    A PUSH whose immediate runs past the end is zero-padded to its full width
    (the bytes the EVM would read) and marked ``truncated``.
    """
    code = bytes(code)
    out = []
    pc = 0
    n = len(code)
    while pc < n:
        op = code[pc]
        width = info(op).push_width
        if width:
            imm = code[pc + 1:pc + 1 + width]
            truncated = len(imm) < width
            if truncated:
                imm = imm + b"\x00" * (width - len(imm))
            out.append(Instruction(pc, op, imm, truncated))
            pc += 1 + width
        else:
            out.append(Instruction(pc, op))
            pc += 1
    return InstructionStream(code, tuple(out))


def parse_hex(text: str) -> bytes:
    """Bytecode file contents: hex digits, optional 0x prefix, any whitespace."""
    s = "".join(text.split())
    if s[:2].lower() == "0x":
        s = s[2:]
    return bytes.fromhex(s)
