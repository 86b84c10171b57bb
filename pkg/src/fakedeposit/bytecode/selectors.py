from __future__ import annotations

from dataclasses import dataclass, field

from .disasm import disassemble
from .keccak import keccak256
from .opcodes import info
from .sections import strip_metadata


@dataclass(frozen=True, order=True)
class Selector:
    value: bytes
    signature: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.value) != 4:
            raise ValueError("selector must be 4 bytes")

    @classmethod
    def of(cls, signature: str) -> "Selector":
        return cls(keccak256(signature.encode())[:4], signature)

    @classmethod
    def from_hex(cls, text: str) -> "Selector":
        value = bytes.fromhex(text.removeprefix("0x"))
        return cls(value, KNOWN.get(value))

    @property
    def hex(self) -> str:
        return self.value.hex()

    @property
    def as_int(self) -> int:
        return int.from_bytes(self.value, "big")

    def __str__(self) -> str:
        return f"0x{self.hex}" + (f" {self.signature}" if self.signature else "")


# marker for exploring the fallback path (no selector in calldata)
FALLBACK = Selector(b"\x00\x00\x00\x00", "<fallback>")

ERC20_SIGNATURES = {
    "totalSupply": "totalSupply()",
    "balanceOf": "balanceOf(address)",
    "transfer": "transfer(address,uint256)",
    "transferFrom": "transferFrom(address,address,uint256)",
    "approve": "approve(address,uint256)",
    "allowance": "allowance(address,address)",
}
ERC20 = {name: Selector.of(sig) for name, sig in ERC20_SIGNATURES.items()}

_EXTRA = [
    "name()", "symbol()", "decimals()", "owner()",
    "depositToken(address,uint256)", "tokens(address,address)",
    "enableTransfer(bool)", "transferEnabled()", "founder()",
    "mint(address,uint256)", "burn(uint256)",
]
KNOWN: dict[bytes, str] = {s.value: s.signature for s in ERC20.values()}
KNOWN.update({Selector.of(sig).value: sig for sig in _EXTRA})


def _static_arg_count(signature: str) -> int | None:
    args = signature[signature.index("(") + 1:-1]
    if not args:
        return 0
    parts = args.split(",")
    if any(p.endswith("]") or p in ("bytes", "string") or "(" in p for p in parts):
        return None
    return len(parts)


def calldata_size(selector: Selector) -> int | None:
    """ABI calldata length for a selector with a known all-static signature."""
    if selector.signature is None or selector == FALLBACK:
        return None
    n = _static_arg_count(selector.signature)
    return None if n is None else 4 + 32 * n


_UNKNOWN = object()


def dispatch_selectors(runtime: bytes) -> tuple[frozenset[Selector], bool]:
    """Selectors compared in the dispatcher, plus a flag set when the
    result came from the PUSH4 fallback heuristic."""
    code = strip_metadata(bytes(runtime))
    stream = disassemble(code)
    found: set[bytes] = set()
    stack: list = []

    def pop():
        return stack.pop() if stack else _UNKNOWN

    for ins in stream:
        name = ins.name
        if ins.opcode == 0x5B:
            continue  # fall-through keeps the stack; jumps in were cleared at their JUMP
        if ins.is_invalid:
            stack.clear()
            continue
        if ins.opcode == 0x63:  # PUSH4
            stack.append(("sel", ins.immediate))
        elif ins.immediate is not None:
            stack.append(_UNKNOWN)
        elif name.startswith("DUP"):
            n = int(name[3:])
            stack.append(stack[-n] if len(stack) >= n else _UNKNOWN)
        elif name.startswith("SWAP"):
            n = int(name[4:])
            while len(stack) < n + 1:
                stack.insert(0, _UNKNOWN)
            stack[-1], stack[-1 - n] = stack[-1 - n], stack[-1]
        elif name == "EQ":
            a, b = pop(), pop()
            tagged = [x for x in (a, b) if isinstance(x, tuple) and x[0] == "sel"]
            stack.append(("eq", tagged[0][1]) if tagged else _UNKNOWN)
        elif name == "JUMPI":
            pop()
            cond = pop()
            if isinstance(cond, tuple) and cond[0] == "eq":
                found.add(cond[1])
        else:
            op = info(ins.opcode)
            for _ in range(op.pops):
                pop()
            stack.extend([_UNKNOWN] * op.pushes)
            if name in ("STOP", "RETURN", "REVERT", "JUMP", "SELFDESTRUCT"):
                stack.clear()

    if found:
        return frozenset(Selector(v, KNOWN.get(v)) for v in found), False

    fallback = set()
    for ins in stream:
        if ins.opcode == 0x5B:
            break
        if ins.opcode == 0x63:
            fallback.add(ins.immediate)
    return frozenset(Selector(v, KNOWN.get(v)) for v in fallback), bool(fallback)


def extract_selectors(runtime: bytes) -> frozenset[Selector]:
    return dispatch_selectors(runtime)[0]
