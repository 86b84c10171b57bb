"""Keccak-256 as used by Ethereum (original 0x01 padding, not the FIPS-202 0x06)."""
from __future__ import annotations


_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]

# rotation offsets indexed by lane x + 5*y
_ROT = [
    0, 1, 62, 28, 27,
    36, 44, 6, 55, 20,
    3, 10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2, 61, 56, 14,
]

# pi step: B[y, 2x+3y] = rot(A[x, y]); precompute destination index per source lane
_PI = [0] * 25
for _x in range(5):
    for _y in range(5):
        _PI[_x + 5 * _y] = _y + 5 * ((2 * _x + 3 * _y) % 5)

RATE = 136


def _unrolled_source() -> str:
    """Source of a straight-line Keccak-f over 25 local lane variables.

    Same rounds as the loop form; unrolling removes list indexing and call
    overhead, which dominates in CPython.
    """
    def rot(expr, n):
        return f"((({expr}) << {n}) | (({expr}) >> {64 - n})) & M" if n else expr

    lanes = ", ".join(f"a{i}" for i in range(25))
    body = [f"def keccak_f(a):", f"    {lanes} = a", "    M = 0xFFFFFFFFFFFFFFFF",
            "    for rc in RC:"]
    for x in range(5):
        body.append(f"        c{x} = a{x} ^ a{x + 5} ^ a{x + 10} ^ a{x + 15} ^ a{x + 20}")
    for x in range(5):
        body.append(f"        d{x} = c{(x - 1) % 5} ^ {rot(f'c{(x + 1) % 5}', 1)}")
    for i in range(25):
        body.append(f"        b{_PI[i]} = {rot(f'a{i} ^ d{i % 5}', _ROT[i])}")
    for y in range(0, 25, 5):
        for x in range(5):
            body.append(f"        a{y + x} = b{y + x} ^ (~b{y + (x + 1) % 5} & b{y + (x + 2) % 5})")
    body.append("        a0 ^= rc")
    body.append(f"    a[:] = [{lanes}]")
    return "\n".join(body) + "\n"


_ns: dict = {"RC": _RC}
exec(compile(_unrolled_source(), "<keccak_f>", "exec"), _ns)
keccak_f = _ns["keccak_f"]
keccak_f.__doc__ = "Keccak-f[1600] permutation, in place, over 25 little-endian lanes."


def keccak256(data: bytes) -> bytes:
    data = bytes(data)
    padded = bytearray(data)
    pad = RATE - len(data) % RATE
    padded += b"\x00" * pad
    padded[len(data)] ^= 0x01
    padded[-1] ^= 0x80
    state = [0] * 25
    for off in range(0, len(padded), RATE):
        block = padded[off:off + RATE]
        for i in range(RATE // 8):
            state[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        keccak_f(state)
    return b"".join(state[i].to_bytes(8, "little") for i in range(4))
