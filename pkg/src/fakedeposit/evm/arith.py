"""256-bit word arithmetic shared by the interpreter and constant folding."""
from __future__ import annotations

WORD = 1 << 256
MASK = WORD - 1
SIGN = 1 << 255
ADDRESS_MASK = (1 << 160) - 1


def signed(x: int) -> int:
    return x - WORD if x & SIGN else x


def unsigned(x: int) -> int:
    return x & MASK


def _sdiv(a, b):
    if b == 0:
        return 0
    sa, sb = signed(a), signed(b)
    q = abs(sa) // abs(sb)
    return unsigned(-q if (sa < 0) != (sb < 0) else q)


def _smod(a, b):
    if b == 0:
        return 0
    sa, sb = signed(a), signed(b)
    r = abs(sa) % abs(sb)
    return unsigned(-r if sa < 0 else r)


def _signextend(b, x):
    if b >= 31:
        return x
    bit = b * 8 + 7
    if x & (1 << bit):
        return x | (WORD - (1 << bit))
    return x & ((1 << bit) - 1)


def _byte(i, x):
    return 0 if i >= 32 else (x >> (8 * (31 - i))) & 0xFF


def _sar(shift, x):
    if shift >= 256:
        return MASK if x & SIGN else 0
    return unsigned(signed(x) >> shift)


# operand order follows the stack: first argument is the top of stack
BINARY = {
    "ADD": lambda a, b: (a + b) & MASK,
    "MUL": lambda a, b: (a * b) & MASK,
    "SUB": lambda a, b: (a - b) & MASK,
    "DIV": lambda a, b: a // b if b else 0,
    "SDIV": _sdiv,
    "MOD": lambda a, b: a % b if b else 0,
    "SMOD": _smod,
    "EXP": lambda a, b: pow(a, b, WORD),
    "SIGNEXTEND": _signextend,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "SLT": lambda a, b: int(signed(a) < signed(b)),
    "SGT": lambda a, b: int(signed(a) > signed(b)),
    "EQ": lambda a, b: int(a == b),
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
    "XOR": lambda a, b: a ^ b,
    "BYTE": _byte,
    "SHL": lambda s, x: (x << s) & MASK if s < 256 else 0,
    "SHR": lambda s, x: x >> s if s < 256 else 0,
    "SAR": _sar,
}

UNARY = {
    "ISZERO": lambda a: int(a == 0),
    "NOT": lambda a: MASK ^ a,
}

TERNARY = {
    "ADDMOD": lambda a, b, n: (a + b) % n if n else 0,
    "MULMOD": lambda a, b, n: (a * b) % n if n else 0,
}


def apply(name: str, args) -> int:
    if len(args) == 1:
        return UNARY[name](*args)
    if len(args) == 2:
        return BINARY[name](*args)
    return TERNARY[name](*args)
