from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..bytecode.disasm import parse_hex
from ..bytecode.keccak import keccak256


class EvmError(Exception):
    """Malformed input to the interpreter (never an in-band execution failure)."""


def to_address(value: int | bytes | str) -> bytes:
    if isinstance(value, str):
        value = parse_hex(value)
    if isinstance(value, int):
        return (value & ((1 << 160) - 1)).to_bytes(20, "big")
    value = bytes(value)
    if len(value) != 20:
        raise EvmError(f"address must be 20 bytes, got {len(value)}")
    return value


def address_int(address: bytes) -> int:
    return int.from_bytes(address, "big")


@dataclass
class Account:
    address: bytes
    balance: int = 0
    code: bytes = b""
    storage: dict[int, int] = field(default_factory=dict)

    @property
    def is_eoa(self) -> bool:
        return not self.code

    def load(self, key: int) -> int:
        return self.storage.get(key, 0)

    def store(self, key: int, value: int) -> None:
        if value:
            self.storage[key] = value
        else:
            self.storage.pop(key, None)

    def copy(self) -> "Account":
        return Account(self.address, self.balance, self.code, dict(self.storage))


@dataclass
class Snapshot:
    accounts: dict[bytes, Account]
    nonces: dict[bytes, int]
    host: dict[bytes, dict]


@dataclass
class WorldState:
    accounts: dict[bytes, Account] = field(default_factory=dict)
    next_nonce: dict[bytes, int] = field(default_factory=dict)
    # native contracts: address -> handler, and the handler's private tables
    natives: dict[bytes, object] = field(default_factory=dict)
    host: dict[bytes, dict] = field(default_factory=dict)

    def get(self, address: bytes) -> Account | None:
        return self.accounts.get(address)

    def account(self, address: bytes) -> Account:
        acct = self.accounts.get(address)
        if acct is None:
            acct = self.accounts[address] = Account(address)
        return acct

    def add_account(self, address, balance: int = 0, code: bytes = b"", storage=None) -> Account:
        address = to_address(address)
        acct = Account(address, balance, bytes(code), {k: v for k, v in (storage or {}).items() if v})
        self.accounts[address] = acct
        return acct

    def nonce(self, address: bytes) -> int:
        return self.next_nonce.get(address, 0)

    def bump_nonce(self, address: bytes) -> int:
        n = self.next_nonce.get(address, 0)
        self.next_nonce[address] = n + 1
        return n

    def copy(self) -> "WorldState":
        return WorldState(
            {a: acct.copy() for a, acct in self.accounts.items()},
            dict(self.next_nonce),
            dict(self.natives),
            copy.deepcopy(self.host),
        )

    def snapshot(self) -> Snapshot:
        return Snapshot(
            {a: acct.copy() for a, acct in self.accounts.items()},
            dict(self.next_nonce),
            copy.deepcopy(self.host),
        )

    def restore(self, snap: Snapshot) -> None:
        self.accounts = snap.accounts
        self.next_nonce = snap.nonces
        self.host = snap.host

    def canonical(self) -> dict:
        accounts = []
        for addr in sorted(self.accounts):
            acct = self.accounts[addr]
            accounts.append({
                "address": "0x" + addr.hex(),
                "balance": str(acct.balance),
                "code": "0x" + acct.code.hex(),
                "storage": {f"{k:064x}": f"{v:064x}" for k, v in sorted(acct.storage.items())},
            })
        return {
            "accounts": accounts,
            "nonces": {"0x" + a.hex(): n for a, n in sorted(self.next_nonce.items())},
            "host": {"0x" + a.hex(): _canonical_table(t) for a, t in sorted(self.host.items())},
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()

    def state_hash(self) -> str:
        return keccak256(self.canonical_bytes()).hex()

    @classmethod
    def from_genesis(cls, entries: list[dict]) -> "WorldState":
        state = cls()
        for entry in entries:
            storage = {
                int(k, 16) if isinstance(k, str) else int(k): int(v, 16) if isinstance(v, str) else int(v)
                for k, v in (entry.get("storage") or {}).items()
            }
            state.add_account(
                entry["address"],
                int(entry.get("balance", 0)),
                parse_hex(entry.get("code") or ""),
                storage,
            )
        return state


def _canonical_table(table):
    if isinstance(table, dict):
        return {_key(k): _canonical_table(v) for k, v in sorted(table.items(), key=lambda kv: _key(kv[0]))}
    if isinstance(table, (bytes, bytearray)):
        return "0x" + bytes(table).hex()
    return table


def _key(k) -> str:
    if isinstance(k, (bytes, bytearray)):
        return "0x" + bytes(k).hex()
    if isinstance(k, tuple):
        return "/".join(_key(x) for x in k)
    return str(k)


def load_genesis(path: str | Path) -> WorldState:
    return WorldState.from_genesis(json.loads(Path(path).read_text()))
