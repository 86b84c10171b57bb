"""Line-oriented assembler used to author test fixtures.

Grammar, one item per line::

    # comment
    name:               label at the current offset (may prefix an instruction)
    PUSH1 0x60          explicit width, hex immediate
    PUSH 0x1234         smallest width that fits
    PUSH2 @name         label or constant reference
    @name               shorthand for PUSH2 @name
    ADD                 any other mnemonic

Fixture files additionally split into sections with ``.section NAME``;
everything before the first header is the ``init`` section, and a
``runtime`` section is required. Sections are laid out in file order and
each exposes ``NAME.offset`` / ``NAME.size`` constants to all sections.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .disasm import disassemble
from .opcodes import BY_NAME

_NAME = r"[A-Za-z_][\w.]*"
_LABEL_RE = re.compile(rf"^({_NAME}):\s*(.*)$")
_REF_RE = re.compile(rf"^@({_NAME})$")


class AsmError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class _Item:
    line: int
    opcode: int
    width: int = 0
    value: int | None = None
    ref: str | None = None

    @property
    def size(self) -> int:
        return 1 + self.width


def _parse_immediate(lineno: int, text: str) -> int:
    if not text.lower().startswith("0x"):
        raise AsmError(lineno, f"immediate must be hex with 0x prefix: {text!r}")
    try:
        return int(text, 16)
    except ValueError:
        raise AsmError(lineno, f"bad hex immediate {text!r}") from None


def _parse(source: str, first_line: int = 1):
    items: list[_Item] = []
    labels: dict[str, int] = {}
    offset = 0
    for lineno, raw in enumerate(source.splitlines(), start=first_line):
        text = raw.split("#", 1)[0].strip()
        while True:
            m = _LABEL_RE.match(text)
            if not m:
                break
            name = m.group(1)
            if name in labels:
                raise AsmError(lineno, f"duplicate label {name!r}")
            labels[name] = offset
            text = m.group(2).strip()
        if not text:
            continue
        ref = _REF_RE.match(text)
        if ref:
            item = _Item(lineno, 0x61, 2, ref=ref.group(1))
        else:
            parts = text.split()
            mnemonic = parts[0].upper()
            operand = parts[1] if len(parts) > 1 else None
            if len(parts) > 2:
                raise AsmError(lineno, f"too many operands: {text!r}")
            item = _instruction(lineno, mnemonic, operand)
        items.append(item)
        offset += item.size
    return items, labels, offset


def _instruction(lineno: int, mnemonic: str, operand: str | None) -> _Item:
    if mnemonic == "PUSH":
        if operand is None:
            raise AsmError(lineno, "PUSH needs an operand")
        ref = _REF_RE.match(operand)
        if ref:
            return _Item(lineno, 0x61, 2, ref=ref.group(1))
        value = _parse_immediate(lineno, operand)
        width = max(1, (value.bit_length() + 7) // 8)
        if width > 32:
            raise AsmError(lineno, "immediate wider than 32 bytes")
        return _Item(lineno, 0x5F + width, width, value=value)
    op = BY_NAME.get(mnemonic)
    if op is None:
        raise AsmError(lineno, f"unknown mnemonic {mnemonic!r}")
    width = op.push_width
    if width == 0:
        if operand is not None:
            raise AsmError(lineno, f"{mnemonic} takes no operand")
        return _Item(lineno, op.code)
    if operand is None:
        raise AsmError(lineno, f"{mnemonic} needs an operand")
    ref = _REF_RE.match(operand)
    if ref:
        return _Item(lineno, op.code, width, ref=ref.group(1))
    value = _parse_immediate(lineno, operand)
    if value.bit_length() > 8 * width:
        raise AsmError(lineno, f"immediate 0x{value:x} does not fit {mnemonic}")
    return _Item(lineno, op.code, width, value=value)


def _emit(items, labels, constants) -> bytes:
    out = bytearray()
    for item in items:
        out.append(item.opcode)
        if not item.width:
            continue
        value = item.value
        if item.ref is not None:
            if item.ref in labels:
                value = labels[item.ref]
            elif item.ref in constants:
                value = constants[item.ref]
            else:
                raise AsmError(item.line, f"undefined label {item.ref!r}")
        if value.bit_length() > 8 * item.width:
            raise AsmError(item.line, f"value 0x{value:x} does not fit PUSH{item.width}")
        out += value.to_bytes(item.width, "big")
    return bytes(out)


def assemble(source: str, constants: dict[str, int] | None = None) -> bytes:
    items, labels, _ = _parse(source)
    return _emit(items, labels, dict(constants or {}))


@dataclass(frozen=True)
class FixtureImage:
    payload: bytes
    runtime: bytes
    sections: dict[str, tuple[int, int]]

    def section(self, name: str) -> bytes:
        off, size = self.sections[name]
        return self.payload[off:off + size]


def split_fixture_source(text: str) -> list[tuple[str, int, str]]:
    """(name, first line number, body) per section, in file order."""
    sections: list[tuple[str, int, list[str]]] = [("init", 1, [])]
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped.startswith(".section"):
            parts = stripped.split()
            if len(parts) != 2:
                raise AsmError(lineno, "expected '.section NAME'")
            if any(parts[1] == s[0] for s in sections):
                raise AsmError(lineno, f"duplicate section {parts[1]!r}")
            sections.append((parts[1], lineno + 1, []))
        else:
            sections[-1][2].append(raw)
    if not any(s[0] == "runtime" for s in sections):
        raise AsmError(1, "fixture has no '.section runtime'")
    return [(name, line, "\n".join(body)) for name, line, body in sections]


def assemble_fixture(text: str, constants: dict[str, int] | None = None) -> FixtureImage:
    parsed = []
    layout: dict[str, int] = {}
    offset = 0
    for name, first_line, body in split_fixture_source(text):
        items, labels, size = _parse(body, first_line)
        parsed.append((name, items, labels))
        layout[f"{name}.offset"] = offset
        layout[f"{name}.size"] = size
        offset += size
    consts = dict(constants or {})
    consts.update(layout)
    blobs = {name: _emit(items, labels, consts) for name, items, labels in parsed}
    payload = b"".join(blobs[name] for name, _, _ in parsed)
    sections = {name: (layout[f"{name}.offset"], layout[f"{name}.size"]) for name, _, _ in parsed}
    return FixtureImage(payload, blobs["runtime"], sections)


def format_asm(code: bytes) -> str:
    """Render bytecode back as assembler text (labels are not recovered)."""
    lines = []
    for ins in disassemble(code):
        if ins.is_invalid and ins.opcode != 0xFE:
            raise ValueError(f"byte 0x{ins.opcode:02x} at {ins.offset} has no mnemonic")
        lines.append(str(ins))
    return "\n".join(lines)
