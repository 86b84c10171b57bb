"""Path enumeration over runtime bytecode without a constraint solver."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from ..bytecode.disasm import InstructionStream, disassemble
from ..bytecode.opcodes import info
from ..bytecode.selectors import FALLBACK, Selector, calldata_size
from ..evm import arith
from . import terms as T
from .terms import Concrete, Input, Term


class ExploreError(ValueError):
    pass


class Terminator(enum.Enum):
    Stop = "Stop"
    Return = "Return"
    Revert = "Revert"
    Invalid = "Invalid"
    SelfDestruct = "SelfDestruct"
    BudgetExceeded = "BudgetExceeded"
    UnsupportedOp = "UnsupportedOp"

    @property
    def normal(self) -> bool:
        return self in (Terminator.Stop, Terminator.Return)

    @property
    def throws(self) -> bool:
        return self in (Terminator.Revert, Terminator.Invalid)

    @property
    def inconclusive(self) -> bool:
        return self in (Terminator.BudgetExceeded, Terminator.UnsupportedOp)


class Branch(enum.Enum):
    TakenOnly = "TakenOnly"
    NotTakenOnly = "NotTakenOnly"
    Both = "Both"


def eval_branch(condition: Term) -> Branch:
    if condition.is_concrete:
        return Branch.TakenOnly if condition.value else Branch.NotTakenOnly
    return Branch.Both


@dataclass(frozen=True)
class ExploreConfig:
    max_paths: int = 512
    loop_bound: int = 3
    max_trace: int = 50_000


@dataclass(frozen=True)
class Step:
    """One executed instruction and the machine state right after it.

    Memory, storage logs and the path condition are append-only along a
    path, so the snapshot keeps their lengths rather than copies.
    """

    offset: int
    opcode: int
    name: str
    args: tuple[Term, ...]
    stack: tuple[Term, ...]
    n_mem: int
    n_reads: int
    n_writes: int
    n_cond: int

    @property
    def result(self) -> Term | None:
        return self.stack[-1] if info(self.opcode).pushes and self.stack else None


@dataclass(frozen=True)
class StorageAccess:
    key: Term
    value: Term
    offset: int
    index: int  # position of the SLOAD/SSTORE step in the path trace


@dataclass(frozen=True)
class Decision:
    fork_id: int  # shared by the sibling paths of one symbolic JUMPI
    offset: int
    condition: Term
    taken: bool
    index: int  # position of the JUMPI step in the path trace


@dataclass(frozen=True)
class SymState:
    pc: int
    stack: tuple[Term, ...]
    memory: tuple
    storage_reads: tuple[StorageAccess, ...]
    storage_writes: tuple[StorageAccess, ...]
    path_condition: tuple[tuple[Term, bool], ...]


@dataclass(frozen=True)
class Path:
    id: int
    selector: Selector
    trace: tuple[Step, ...]
    terminator: Terminator
    storage_reads: tuple[StorageAccess, ...]
    storage_writes: tuple[StorageAccess, ...]
    decisions: tuple[Decision, ...]
    memory: tuple = ()
    returned: tuple[Term, ...] = ()
    note: str = ""

    @property
    def path_condition(self) -> tuple[tuple[Term, bool], ...]:
        return tuple((d.condition, d.taken) for d in self.decisions)

    @property
    def offsets(self) -> list[int]:
        return [s.offset for s in self.trace]

    def state_at(self, i: int) -> SymState:
        s = self.trace[i]
        nxt = self.trace[i + 1].offset if i + 1 < len(self.trace) else s.offset
        return SymState(nxt, s.stack, self.memory[:s.n_mem], self.storage_reads[:s.n_reads],
                        self.storage_writes[:s.n_writes], self.path_condition[:s.n_cond])

    def forks(self) -> dict[int, Decision]:
        return {d.fork_id: d for d in self.decisions}

    def to_json(self) -> dict:
        return {
            "path": self.id,
            "selector": "0x" + self.selector.hex,
            "terminator": self.terminator.value,
            "storage_reads": [[repr(a.key), a.offset] for a in self.storage_reads],
            "storage_writes": [[repr(a.key), repr(a.value), a.offset] for a in self.storage_writes],
            "pc_trace_length": len(self.trace),
        }


# -- symbolic memory ----------------------------------------------------------


@dataclass(frozen=True)
class MemWrite:
    offset: Term
    size: int
    value: object  # Term for a word/byte, bytes for a concrete blob, None for unknown


def _concrete_bytes(w: MemWrite) -> bytes | None:
    if isinstance(w.value, bytes):
        return w.value
    if isinstance(w.value, Concrete):
        return w.value.value.to_bytes(32, "big")[-w.size:]
    return None


class _Frame:
    """Mutable per-path execution state."""

    __slots__ = ("pc", "stack", "memory", "reads", "writes", "decisions", "trace",
                 "visits", "fresh", "returndata", "returned")

    def __init__(self):
        self.pc = 0
        self.stack: list[Term] = []
        self.memory: list[MemWrite] = []
        self.reads: list[StorageAccess] = []
        self.writes: list[StorageAccess] = []
        self.decisions: list[Decision] = []
        self.trace: list[Step] = []
        self.visits: dict[int, int] = {}
        self.fresh = 0
        self.returndata: Term = T.ZERO
        self.returned: tuple[Term, ...] = ()

    def fork(self) -> "_Frame":
        f = _Frame()
        f.pc = self.pc
        f.stack = list(self.stack)
        f.memory = list(self.memory)
        f.reads = list(self.reads)
        f.writes = list(self.writes)
        f.decisions = list(self.decisions)
        f.trace = list(self.trace)
        f.visits = dict(self.visits)
        f.fresh = self.fresh
        f.returndata = self.returndata
        return f

    def new_input(self, prefix: str) -> Input:
        self.fresh += 1
        return Input(f"{prefix}_{self.pc}_{self.fresh}")

    def mload(self, offset: Term) -> Term:
        for w in reversed(self.memory):
            if w.offset == offset and w.size == 32 and isinstance(w.value, Term):
                return w.value
            if not offset.is_concrete:
                return self.new_input("mem")
            if not w.offset.is_concrete:
                continue  # symbolic write addresses are assumed not to alias concrete reads
            lo = w.offset.value
            if lo < offset.value + 32 and offset.value < lo + w.size:
                break
        if not offset.is_concrete:
            return self.new_input("mem")
        start = offset.value
        buf = bytearray(32)
        for w in self.memory:
            if not w.offset.is_concrete:
                continue
            lo = w.offset.value
            if lo >= start + 32 or lo + w.size <= start:
                continue
            data = _concrete_bytes(w)
            if data is None:
                return self.new_input("mem")
            a, b = max(lo, start), min(lo + w.size, start + 32)
            buf[a - start:b - start] = data[a - lo:b - lo]
        return Concrete(int.from_bytes(buf, "big"))

    def mstore(self, offset: Term, size: int, value) -> None:
        self.memory.append(MemWrite(offset, size, value))


# -- the explorer -------------------------------------------------------------


_ENV_INPUTS = {
    "ADDRESS": "address", "ORIGIN": "origin", "CALLER": "caller", "CALLVALUE": "callvalue",
    "GASPRICE": "gasprice", "COINBASE": "coinbase", "TIMESTAMP": "timestamp",
    "NUMBER": "number", "DIFFICULTY": "difficulty", "GASLIMIT": "gaslimit",
}


def _calldata_word(selector: Selector, offset: int) -> Term:
    if offset == 0:
        return Concrete(selector.as_int << 224)
    if offset >= 4 and (offset - 4) % 32 == 0:
        return Input(f"calldata_{(offset - 4) // 32 + 1}")
    return Input(f"calldata@{offset}")


class _Explorer:
    def __init__(self, stream: InstructionStream, selector: Selector, cfg: ExploreConfig):
        self.stream = stream
        self.code = stream.code
        self.by_offset = stream.by_offset
        self.jumpdests = stream.jumpdests
        self.selector = selector
        self.cfg = cfg
        self.size = calldata_size(selector)
        self.paths: list[Path] = []
        self.next_fork = 0

    def run(self) -> list[Path]:
        pending = [_Frame()]
        while pending:
            frame = pending.pop()
            term, note, child = self._execute(frame, len(pending))
            if child is not None:
                # the taken side is explored first, its sibling next
                pending.append(child)
                pending.append(frame)
                continue
            self._finish(frame, term, note)
        return self.paths

    def _finish(self, f: _Frame, term: Terminator, note: str = "") -> None:
        self.paths.append(Path(
            len(self.paths), self.selector, tuple(f.trace), term, tuple(f.reads),
            tuple(f.writes), tuple(f.decisions), tuple(f.memory), f.returned, note,
        ))

    def _record(self, f: _Frame, ins, args) -> None:
        f.trace.append(Step(ins.offset, ins.opcode, ins.name, tuple(args), tuple(f.stack),
                            len(f.memory), len(f.reads), len(f.writes), len(f.decisions)))

    def _execute(self, f: _Frame, n_pending: int):
        """Run `f` until it terminates or forks.

        Returns (terminator, note, None) on termination, or
        (None, None, other) where `other` is the not-taken sibling and `f`
        has been advanced along the taken side.
        """
        cfg = self.cfg
        code_len = len(self.code)
        while True:
            if f.pc >= code_len:
                return Terminator.Stop, "fell off end of code", None
            if len(f.trace) >= cfg.max_trace:
                return Terminator.BudgetExceeded, "trace limit", None
            visits = f.visits.get(f.pc, 0) + 1
            if visits > cfg.loop_bound + 1:
                return Terminator.BudgetExceeded, f"loop bound at {f.pc}", None
            f.visits[f.pc] = visits
            ins = self.by_offset[f.pc]
            meta = info(ins.opcode)
            name = ins.name
            if ins.is_invalid:
                self._record(f, ins, ())
                return Terminator.Invalid, name, None
            if len(f.stack) < meta.pops:
                self._record(f, ins, ())
                return Terminator.Invalid, "stack underflow", None
            if len(f.stack) - meta.pops + meta.pushes > 1024:
                self._record(f, ins, ())
                return Terminator.Invalid, "stack overflow", None
            stack = f.stack

            if ins.immediate is not None:
                stack.append(Concrete(int.from_bytes(ins.immediate, "big")))
                self._record(f, ins, ())
                f.pc = ins.next_offset
                continue
            if name.startswith("DUP"):
                stack.append(stack[-int(name[3:])])
                self._record(f, ins, ())
                f.pc = ins.next_offset
                continue
            if name.startswith("SWAP"):
                k = int(name[4:]) + 1
                stack[-1], stack[-k] = stack[-k], stack[-1]
                self._record(f, ins, ())
                f.pc = ins.next_offset
                continue

            args = [stack.pop() for _ in range(meta.pops)]
            if name in arith.BINARY or name in arith.UNARY or name in arith.TERNARY:
                stack.append(T.op(name, *args))
            elif name == "STOP":
                self._record(f, ins, args)
                return Terminator.Stop, "", None
            elif name == "SHA3":
                off, size = args
                if not (off.is_concrete and size.is_concrete) or size.value > 1024:
                    stack.append(f.new_input("sha3"))
                else:
                    n = size.value
                    words = tuple(
                        f.mload(Concrete(off.value + i)) for i in range(0, n, 32)
                    )
                    stack.append(T.sha3(words, n))
            elif name in _ENV_INPUTS:
                stack.append(Input(_ENV_INPUTS[name]))
            elif name == "CALLDATALOAD":
                (off,) = args
                if off.is_concrete:
                    stack.append(_calldata_word(self.selector, off.value))
                else:
                    stack.append(T.Op("CALLDATALOAD", (off,)))
            elif name == "CALLDATASIZE":
                stack.append(Concrete(self.size) if self.size is not None else Input("calldatasize"))
            elif name == "CALLDATACOPY":
                moff, doff, size = args
                self._copy_unknown(f, moff, size)
            elif name == "CODESIZE":
                stack.append(Concrete(code_len))
            elif name == "CODECOPY":
                moff, coff, size = args
                if moff.is_concrete and coff.is_concrete and size.is_concrete and size.value <= 1 << 16:
                    chunk = self.code[coff.value:coff.value + size.value]
                    chunk += bytes(size.value - len(chunk))
                    if chunk:
                        f.mstore(moff, len(chunk), chunk)
                else:
                    self._copy_unknown(f, moff, size)
            elif name in ("BALANCE", "EXTCODESIZE", "EXTCODEHASH", "BLOCKHASH"):
                stack.append(f.new_input(name.lower()))
            elif name == "EXTCODECOPY":
                self._copy_unknown(f, args[1], args[3])
            elif name == "RETURNDATASIZE":
                stack.append(f.returndata)
            elif name == "RETURNDATACOPY":
                self._copy_unknown(f, args[0], args[2])
            elif name == "GAS":
                stack.append(f.new_input("gas"))
            elif name in ("PC",):
                stack.append(Concrete(ins.offset))
            elif name == "MSIZE":
                stack.append(f.new_input("msize"))
            elif name == "POP":
                pass
            elif name == "MLOAD":
                stack.append(f.mload(args[0]))
            elif name == "MSTORE":
                f.mstore(args[0], 32, args[1])
            elif name == "MSTORE8":
                val = args[1]
                f.mstore(args[0], 1, Concrete(val.value & 0xFF) if val.is_concrete else None)
            elif name == "SLOAD":
                key = args[0]
                value = None
                for w in reversed(f.writes):
                    if w.key == key:
                        value = w.value
                        break
                if value is None:
                    value = T.StorageRead(key)
                f.reads.append(StorageAccess(key, value, ins.offset, len(f.trace)))
                stack.append(value)
            elif name == "SSTORE":
                f.writes.append(StorageAccess(args[0], args[1], ins.offset, len(f.trace)))
            elif name == "JUMP":
                (dest,) = args
                self._record(f, ins, args)
                if not dest.is_concrete:
                    return Terminator.UnsupportedOp, "symbolic jump target", None
                if dest.value not in self.jumpdests:
                    return Terminator.Invalid, "bad jump destination", None
                f.pc = dest.value
                continue
            elif name == "JUMPI":
                dest, cond = args
                self._record(f, ins, args)
                branch = eval_branch(cond)
                if branch is Branch.NotTakenOnly:
                    f.pc = ins.next_offset
                    continue
                if not dest.is_concrete:
                    return Terminator.UnsupportedOp, "symbolic jump target", None
                if branch is Branch.TakenOnly:
                    if dest.value not in self.jumpdests:
                        return Terminator.Invalid, "bad jump destination", None
                    f.pc = dest.value
                    continue
                if len(self.paths) + n_pending + 2 > cfg.max_paths:
                    return Terminator.BudgetExceeded, "path limit", None
                fork_id = self.next_fork
                self.next_fork += 1
                other = f.fork()
                other.decisions.append(Decision(fork_id, ins.offset, cond, False, len(f.trace) - 1))
                other.pc = ins.next_offset
                f.decisions.append(Decision(fork_id, ins.offset, cond, True, len(f.trace) - 1))
                if dest.value not in self.jumpdests:
                    # the taken side fails immediately; keep it as a path
                    self._finish(f, Terminator.Invalid, "bad jump destination")
                    return self._execute(other, n_pending)
                f.pc = dest.value
                return None, None, other
            elif name == "JUMPDEST":
                pass
            elif name.startswith("LOG"):
                pass
            elif name in ("CALL", "CALLCODE", "DELEGATECALL", "STATICCALL"):
                out_off, out_size = args[-2], args[-1]
                self._copy_unknown(f, out_off, out_size)
                f.returndata = f.new_input("returndatasize")
                stack.append(f.new_input("call"))
            elif name in ("CREATE", "CREATE2"):
                f.returndata = T.ZERO
                stack.append(f.new_input("create"))
            elif name == "RETURN":
                self._record(f, ins, args)
                off, size = args
                if off.is_concrete and size.is_concrete and size.value <= 256:
                    f.returned = tuple(
                        f.mload(Concrete(off.value + i)) for i in range(0, size.value, 32))
                return Terminator.Return, "", None
            elif name == "REVERT":
                self._record(f, ins, args)
                return Terminator.Revert, "", None
            elif name == "SELFDESTRUCT":
                self._record(f, ins, args)
                return Terminator.SelfDestruct, "", None
            else:
                self._record(f, ins, args)
                return Terminator.UnsupportedOp, name, None
            self._record(f, ins, args)
            f.pc = ins.next_offset

    def _copy_unknown(self, f: _Frame, moff: Term, size: Term) -> None:
        if size.is_concrete and size.value == 0:
            return
        if size.is_concrete and moff.is_concrete:
            f.mstore(moff, size.value, None)
        else:
            # unknown extent: poison every concrete address a fixture could use
            f.mstore(T.ZERO, 1 << 16, None)


def explore(runtime: bytes, selector: Selector = FALLBACK,
            cfg: ExploreConfig | None = None) -> list[Path]:
    if not isinstance(runtime, (bytes, bytearray)):
        raise ExploreError("runtime must be bytes")
    stream = disassemble(bytes(runtime))
    return _Explorer(stream, selector, cfg or ExploreConfig()).run()
