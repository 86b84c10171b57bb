"""Minimal ABI encoding for static argument lists (address, uint256, bool)."""
from __future__ import annotations

from .bytecode.selectors import Selector


def word(value: int | bytes) -> bytes:
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).rjust(32, b"\x00")
    return (value % (1 << 256)).to_bytes(32, "big")


def encode_call(signature: str, *args: int | bytes) -> bytes:
    return Selector.of(signature).value + b"".join(word(a) for a in args)


def decode_word(data: bytes) -> int | None:
    """First return word, or None when there is no full word."""
    if len(data) < 32:
        return None
    return int.from_bytes(data[:32], "big")
