"""Concrete EVM interpreter with transaction-level revert semantics.

Gas is replaced by a flat step budget shared by every frame of a
transaction; exhausting it fails the whole transaction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

from ..bytecode.keccak import keccak256
from ..bytecode.opcodes import OPCODES
from . import arith
from .state import EvmError, WorldState, address_int, to_address

DEFAULT_STEP_BUDGET = 10_000_000
MAX_DEPTH = 1024
STACK_LIMIT = 1024
MEMORY_LIMIT = 1 << 22
NATIVE_MARKER = b"\xfenative"

Tracer = Callable[[int, int, int], None]


@dataclass(frozen=True)
class BlockEnv:
    coinbase: int = 0
    timestamp: int = 1_577_836_800
    number: int = 9_200_000
    difficulty: int = 2_500_000_000_000_000
    gaslimit: int = 10_000_000
    gasprice: int = 1


@dataclass(frozen=True)
class Tx:
    sender: bytes
    to: bytes | None
    data: bytes = b""
    value: int = 0
    step_budget: int = DEFAULT_STEP_BUDGET


@dataclass(frozen=True)
class Log:
    address: bytes
    topics: tuple[int, ...]
    data: bytes

    def to_json(self) -> dict:
        return {
            "address": "0x" + self.address.hex(),
            "topics": [f"0x{t:064x}" for t in self.topics],
            "data": "0x" + self.data.hex(),
        }


@dataclass(frozen=True)
class Receipt:
    status: int
    returndata: bytes = b""
    logs: tuple[Log, ...] = ()
    steps_used: int = 0
    created: bytes | None = None
    error: str | None = None
    code_copies: tuple[tuple[int, int], ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == 1


def transcript_entry(tx: Tx, receipt: Receipt) -> dict:
    """One line of the JSON transcript log."""
    return {
        "from": "0x" + tx.sender.hex(),
        "to": None if tx.to is None else "0x" + tx.to.hex(),
        "data": "0x" + tx.data.hex(),
        "status": receipt.status,
        "returndata": "0x" + receipt.returndata.hex(),
        "logs": [log.to_json() for log in receipt.logs],
    }


@dataclass
class CallContext:
    caller: bytes
    callee: bytes
    value: int
    calldata: bytes
    depth: int
    code_address: bytes | None = None
    static: bool = False
    is_create: bool = False
    moves_value: bool = True


@dataclass
class _Result:
    ok: bool
    returndata: bytes = b""
    logs: list = field(default_factory=list)
    error: str | None = None


class _Halt(Exception):
    def __init__(self, reason: str, data: bytes = b""):
        super().__init__(reason)
        self.reason = reason
        self.data = data


class _OutOfSteps(Exception):
    pass


class NativeRevert(Exception):
    """Raised by a native handler to revert its frame."""

    def __init__(self, data: bytes = b"", reason: str = "native revert"):
        super().__init__(reason)
        self.data = data


@lru_cache(maxsize=256)
def _jumpdests(code: bytes) -> frozenset[int]:
    dests = set()
    pc, n = 0, len(code)
    while pc < n:
        op = code[pc]
        if op == 0x5B:
            dests.add(pc)
        pc += 1 + (op - 0x5F if 0x60 <= op <= 0x7F else 0)
    return frozenset(dests)


def derive_address(sender: bytes, nonce: int) -> bytes:
    """Harness-local scheme: first 20 bytes of keccak256(sender ++ nonce)."""
    nb = nonce.to_bytes((nonce.bit_length() + 7) // 8, "big") if nonce else b""
    return keccak256(sender + nb)[:20]


def derive_address2(sender: bytes, salt: int, init_code: bytes) -> bytes:
    return keccak256(b"\xff" + sender + salt.to_bytes(32, "big") + keccak256(init_code))[12:]


def _mem_extend(mem: bytearray, offset: int, size: int) -> None:
    if size == 0:
        return
    end = offset + size
    if end > MEMORY_LIMIT:
        raise _Halt("memory limit")
    if end > len(mem):
        mem.extend(bytes((end + 31) // 32 * 32 - len(mem)))


def _mem_read(mem: bytearray, offset: int, size: int) -> bytes:
    if size == 0:
        return b""
    _mem_extend(mem, offset, size)
    return bytes(mem[offset:offset + size])


def _mem_write(mem: bytearray, offset: int, data: bytes) -> None:
    if not data:
        return
    _mem_extend(mem, offset, len(data))
    mem[offset:offset + len(data)] = data


def _slice_padded(data: bytes, offset: int, size: int) -> bytes:
    if offset >= len(data):
        return bytes(size)
    chunk = data[offset:offset + size]
    return chunk + bytes(size - len(chunk))


class NativeContext:
    """What a native handler sees: its call context plus host services."""

    def __init__(self, interp: "Interpreter", ctx: CallContext):
        self._interp = interp
        self.ctx = ctx
        self.address = ctx.callee
        self.caller = ctx.caller
        self.value = ctx.value
        self.calldata = ctx.calldata
        self.logs: list[Log] = []

    @property
    def table(self) -> dict:
        # re-fetched on every access: a nested revert swaps the dict object
        return self._interp.state.host.setdefault(self.address, {})

    def call(self, to: bytes, data: bytes, value: int = 0) -> tuple[int, bytes]:
        res = self._interp.message_call(
            CallContext(self.address, to, value, data, self.ctx.depth + 1, to, self.ctx.static)
        )
        if res.ok:
            self.logs.extend(res.logs)
        return (1 if res.ok else 0), res.returndata

    def log(self, topics, data: bytes = b"") -> None:
        self.logs.append(Log(self.address, tuple(topics), bytes(data)))


class Interpreter:
    def __init__(self, state: WorldState, budget: int, origin: bytes,
                 block: BlockEnv | None = None, tracer: Tracer | None = None):
        self.state = state
        self.budget = budget
        self.steps = 0
        self.origin = origin
        self.block = block or BlockEnv()
        self.tracer = tracer
        self.destructed: set[bytes] = set()
        self.code_copies: list[tuple[int, int]] = []

    # -- frames -----------------------------------------------------------

    def message_call(self, ctx: CallContext) -> _Result:
        if ctx.depth > MAX_DEPTH:
            return _Result(False, error="call depth")
        state = self.state
        snap = state.snapshot()
        destructed = set(self.destructed)
        if ctx.value and ctx.moves_value:
            if ctx.static:
                return _Result(False, error="value in static call")
            payer = state.get(ctx.caller)
            if payer is None or payer.balance < ctx.value:
                return _Result(False, error="insufficient balance")
            payer.balance -= ctx.value
            state.account(ctx.callee).balance += ctx.value
        code_addr = ctx.code_address or ctx.callee
        handler = state.natives.get(code_addr)
        if handler is not None:
            res = self._run_native(handler, ctx)
        else:
            acct = state.get(code_addr)
            code = acct.code if acct else b""
            res = self._run_frame(ctx, code) if code else _Result(True)
        if not res.ok:
            state.restore(snap)
            self.destructed = destructed
        return res

    def _run_native(self, handler, ctx: CallContext) -> _Result:
        native = NativeContext(self, ctx)
        self.steps += 1
        if self.steps > self.budget:
            raise _OutOfSteps()
        try:
            out = handler(native)
        except NativeRevert as exc:
            return _Result(False, exc.data, error=str(exc))
        return _Result(True, bytes(out or b""), native.logs)

    def create(self, creator: bytes, value: int, init_code: bytes, depth: int,
               salt: int | None = None, static: bool = False) -> tuple[_Result, bytes | None]:
        state = self.state
        if depth > MAX_DEPTH or static:
            return _Result(False, error="create not allowed"), None
        nonce = state.bump_nonce(creator)
        if salt is None:
            addr = derive_address(creator, nonce)
        else:
            addr = derive_address2(creator, salt, init_code)
        existing = state.get(addr)
        if existing is not None and (existing.code or state.nonce(addr) or addr in state.natives):
            return _Result(False, error="address collision"), None
        payer = state.get(creator)
        if value and (payer is None or payer.balance < value):
            return _Result(False, error="insufficient balance"), None
        snap = state.snapshot()
        destructed = set(self.destructed)
        state.account(addr)
        if value:
            payer.balance -= value
            state.account(addr).balance += value
        ctx = CallContext(creator, addr, value, b"", depth, addr, False, is_create=True)
        res = self._run_frame(ctx, init_code) if init_code else _Result(True)
        if not res.ok:
            state.restore(snap)
            self.destructed = destructed
            return res, None
        state.account(addr).code = res.returndata
        return _Result(True, b"", res.logs), addr

    # -- the interpreter loop ---------------------------------------------

    def _run_frame(self, ctx: CallContext, code: bytes) -> _Result:
        try:
            return self._loop(ctx, code)
        except _Halt as halt:
            return _Result(False, halt.data, error=halt.reason)

    def _loop(self, ctx: CallContext, code: bytes) -> _Result:  # noqa: C901
        state = self.state
        jumpdests = _jumpdests(code)
        stack: list[int] = []
        mem = bytearray()
        logs: list[Log] = []
        returndata = b""
        pc = 0
        n = len(code)
        tracer = self.tracer
        MASK = arith.MASK

        while True:
            if pc >= n:
                return _Result(True, b"", logs)
            self.steps += 1
            if self.steps > self.budget:
                raise _OutOfSteps()
            op = code[pc]
            if tracer is not None:
                tracer(ctx.depth, pc, op)
            meta = OPCODES.get(op)
            if meta is None:
                raise _Halt(f"invalid opcode 0x{op:02x}")
            if len(stack) < meta.pops:
                raise _Halt("stack underflow")
            if len(stack) - meta.pops + meta.pushes > STACK_LIMIT:
                raise _Halt("stack overflow")
            name = meta.name

            if 0x60 <= op <= 0x7F:
                width = op - 0x5F
                stack.append(int.from_bytes(_slice_padded(code, pc + 1, width), "big"))
                pc += 1 + width
                continue
            if 0x80 <= op <= 0x8F:
                stack.append(stack[-(op - 0x7F)])
                pc += 1
                continue
            if 0x90 <= op <= 0x9F:
                k = op - 0x8E
                stack[-1], stack[-k] = stack[-k], stack[-1]
                pc += 1
                continue
            if name in arith.BINARY:
                a = stack.pop()
                b = stack.pop()
                stack.append(arith.BINARY[name](a, b))
                pc += 1
                continue
            if name in arith.UNARY:
                stack.append(arith.UNARY[name](stack.pop()))
                pc += 1
                continue
            if name in arith.TERNARY:
                a, b, m = stack.pop(), stack.pop(), stack.pop()
                stack.append(arith.TERNARY[name](a, b, m))
                pc += 1
                continue

            if op == 0x00:  # STOP
                return _Result(True, b"", logs)
            elif op == 0x20:  # SHA3
                off, size = stack.pop(), stack.pop()
                stack.append(int.from_bytes(keccak256(_mem_read(mem, off, size)), "big"))
            elif op == 0x30:
                stack.append(address_int(ctx.callee))
            elif op == 0x31:
                acct = state.get(to_address(stack.pop()))
                stack.append(acct.balance if acct else 0)
            elif op == 0x32:
                stack.append(address_int(self.origin))
            elif op == 0x33:
                stack.append(address_int(ctx.caller))
            elif op == 0x34:
                stack.append(ctx.value)
            elif op == 0x35:
                off = stack.pop()
                stack.append(int.from_bytes(_slice_padded(ctx.calldata, off, 32), "big"))
            elif op == 0x36:
                stack.append(len(ctx.calldata))
            elif op == 0x37:
                moff, doff, size = stack.pop(), stack.pop(), stack.pop()
                _mem_write(mem, moff, _slice_padded(ctx.calldata, doff, size))
            elif op == 0x38:
                stack.append(n)
            elif op == 0x39:
                moff, coff, size = stack.pop(), stack.pop(), stack.pop()
                if ctx.is_create and ctx.depth == 0:
                    self.code_copies.append((coff, size))
                _mem_write(mem, moff, _slice_padded(code, coff, size))
            elif op == 0x3A:
                stack.append(self.block.gasprice)
            elif op == 0x3B:
                acct = state.get(to_address(stack.pop()))
                stack.append(len(acct.code) if acct else 0)
            elif op == 0x3C:
                addr = to_address(stack.pop())
                moff, coff, size = stack.pop(), stack.pop(), stack.pop()
                acct = state.get(addr)
                _mem_write(mem, moff, _slice_padded(acct.code if acct else b"", coff, size))
            elif op == 0x3D:
                stack.append(len(returndata))
            elif op == 0x3E:
                moff, roff, size = stack.pop(), stack.pop(), stack.pop()
                if roff + size > len(returndata):
                    raise _Halt("returndata out of bounds")
                _mem_write(mem, moff, returndata[roff:roff + size])
            elif op == 0x3F:
                acct = state.get(to_address(stack.pop()))
                stack.append(int.from_bytes(keccak256(acct.code), "big") if acct else 0)
            elif op == 0x40:
                stack.pop()
                stack.append(0)
            elif op == 0x41:
                stack.append(self.block.coinbase)
            elif op == 0x42:
                stack.append(self.block.timestamp)
            elif op == 0x43:
                stack.append(self.block.number)
            elif op == 0x44:
                stack.append(self.block.difficulty)
            elif op == 0x45:
                stack.append(self.block.gaslimit)
            elif op == 0x50:
                stack.pop()
            elif op == 0x51:
                off = stack.pop()
                stack.append(int.from_bytes(_mem_read(mem, off, 32), "big"))
            elif op == 0x52:
                off, val = stack.pop(), stack.pop()
                _mem_write(mem, off, val.to_bytes(32, "big"))
            elif op == 0x53:
                off, val = stack.pop(), stack.pop()
                _mem_write(mem, off, bytes([val & 0xFF]))
            elif op == 0x54:
                key = stack.pop()
                acct = state.get(ctx.callee)
                stack.append(acct.load(key) if acct else 0)
            elif op == 0x55:
                if ctx.static:
                    raise _Halt("SSTORE in static call")
                key, val = stack.pop(), stack.pop()
                state.account(ctx.callee).store(key, val)
            elif op == 0x56:
                dest = stack.pop()
                if dest not in jumpdests:
                    raise _Halt("bad jump destination")
                pc = dest
                continue
            elif op == 0x57:
                dest, cond = stack.pop(), stack.pop()
                if cond:
                    if dest not in jumpdests:
                        raise _Halt("bad jump destination")
                    pc = dest
                    continue
            elif op == 0x58:
                stack.append(pc)
            elif op == 0x59:
                stack.append(len(mem))
            elif op == 0x5A:
                stack.append(max(self.budget - self.steps, 0))
            elif op == 0x5B:
                pass
            elif 0xA0 <= op <= 0xA4:
                if ctx.static:
                    raise _Halt("LOG in static call")
                off, size = stack.pop(), stack.pop()
                topics = tuple(stack.pop() for _ in range(op - 0xA0))
                logs.append(Log(ctx.callee, topics, _mem_read(mem, off, size)))
            elif op in (0xF0, 0xF5):  # CREATE, CREATE2
                value, off, size = stack.pop(), stack.pop(), stack.pop()
                salt = stack.pop() if op == 0xF5 else None
                init = _mem_read(mem, off, size)
                res, addr = self.create(ctx.callee, value, init, ctx.depth + 1, salt, ctx.static)
                if res.ok:
                    logs.extend(res.logs)
                    returndata = b""
                else:
                    returndata = res.returndata
                stack.append(address_int(addr) if addr else 0)
            elif op in (0xF1, 0xF2, 0xF4, 0xFA):
                stack.pop()  # gas
                target = to_address(stack.pop())
                if op in (0xF1, 0xF2):
                    value = stack.pop()
                else:
                    value = 0
                in_off, in_size, out_off, out_size = stack.pop(), stack.pop(), stack.pop(), stack.pop()
                data = _mem_read(mem, in_off, in_size)
                if op == 0xF1:
                    if ctx.static and value:
                        raise _Halt("value transfer in static call")
                    sub = CallContext(ctx.callee, target, value, data, ctx.depth + 1, target, ctx.static)
                elif op == 0xF2:
                    sub = CallContext(ctx.callee, ctx.callee, 0, data, ctx.depth + 1, target, ctx.static)
                    if value and state.account(ctx.callee).balance < value:
                        sub = None
                elif op == 0xF4:
                    sub = CallContext(ctx.caller, ctx.callee, ctx.value, data, ctx.depth + 1, target,
                                      ctx.static, moves_value=False)
                else:
                    sub = CallContext(ctx.callee, target, 0, data, ctx.depth + 1, target, True)
                if sub is None:
                    res = _Result(False, error="insufficient balance")
                else:
                    res = self.message_call(sub)
                returndata = res.returndata
                if res.ok:
                    logs.extend(res.logs)
                _mem_write(mem, out_off, returndata[:out_size])
                stack.append(1 if res.ok else 0)
            elif op == 0xF3:
                off, size = stack.pop(), stack.pop()
                return _Result(True, _mem_read(mem, off, size), logs)
            elif op == 0xFD:
                off, size = stack.pop(), stack.pop()
                raise _Halt("revert", _mem_read(mem, off, size))
            elif op == 0xFE:
                raise _Halt("invalid instruction")
            elif op == 0xFF:
                if ctx.static:
                    raise _Halt("SELFDESTRUCT in static call")
                beneficiary = to_address(stack.pop())
                acct = state.account(ctx.callee)
                bal, acct.balance = acct.balance, 0
                if beneficiary != ctx.callee:
                    state.account(beneficiary).balance += bal
                self.destructed.add(ctx.callee)
                return _Result(True, b"", logs)
            else:
                raise _Halt(f"unsupported opcode {name}")
            pc += 1


# -- public, functional surface ---------------------------------------------


def execute_transaction(
    state: WorldState,
    tx: Tx,
    *,
    tracer: Tracer | None = None,
    block: BlockEnv | None = None,
) -> tuple[WorldState, Receipt]:
    """Run `tx` against a copy of `state`.

    On failure the original `state` object is returned unchanged. On success
    the sender's nonce advances and the new state is returned.
    """
    if tx.sender not in state.accounts:
        raise EvmError(f"unknown sender 0x{tx.sender.hex()}")
    if tx.step_budget <= 0:
        raise EvmError("step budget must be positive")
    if tx.to is not None and len(tx.to) != 20:
        raise EvmError("recipient must be 20 bytes")
    work = state.copy()
    interp = Interpreter(work, tx.step_budget, tx.sender, block, tracer)
    created = None
    try:
        if tx.to is None:
            res, created = interp.create(tx.sender, tx.value, tx.data, 0)
        else:
            res = interp.message_call(CallContext(tx.sender, tx.to, tx.value, tx.data, 0, tx.to))
    except _OutOfSteps:
        res = _Result(False, error="step budget exhausted")
    steps = min(interp.steps, tx.step_budget)
    if not res.ok:
        return state, Receipt(0, res.returndata, (), steps, None, res.error, tuple(interp.code_copies))
    if tx.to is not None:
        work.bump_nonce(tx.sender)
    for addr in sorted(interp.destructed):
        work.accounts.pop(addr, None)
        work.next_nonce.pop(addr, None)
    return work, Receipt(1, res.returndata, tuple(res.logs), steps, created, None, tuple(interp.code_copies))


def deploy(state: WorldState, sender: bytes, payload: bytes, value: int = 0,
           step_budget: int = DEFAULT_STEP_BUDGET) -> tuple[WorldState, bytes | None, Receipt]:
    if not payload:
        raise EvmError("empty deployment payload")
    new_state, receipt = execute_transaction(state, Tx(sender, None, bytes(payload), value, step_budget))
    return new_state, receipt.created, receipt


def call_view(state: WorldState, sender: bytes, to: bytes, data: bytes,
              step_budget: int = DEFAULT_STEP_BUDGET) -> Receipt:
    """Execute a call and throw every state change away."""
    if to not in state.accounts:
        raise EvmError(f"no account at 0x{to.hex()}")
    _, receipt = execute_transaction(state, Tx(sender, to, bytes(data), 0, step_budget))
    return receipt


def register_native(state: WorldState, address: bytes, handler) -> WorldState:
    """Install `handler(ctx: NativeContext) -> bytes` as the code of `address`."""
    address = to_address(address)
    existing = state.get(address)
    if (existing is not None and existing.code) or address in state.natives:
        raise EvmError(f"address 0x{address.hex()} already holds a contract")
    new = state.copy()
    acct = new.account(address)
    acct.code = NATIVE_MARKER
    new.natives[address] = handler
    new.host[address] = {}
    return new
