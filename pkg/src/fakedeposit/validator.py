"""Dynamic validation: replay the DEX (Type-I) and CEX (Type-II) fake-deposit
scripts against a freshly deployed token on the embedded EVM."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from .abi import decode_word, encode_call
from .detector import StaticFinding
from .dex import TOKENS, DecodePolicy, NativeDex
from .evm.interpreter import (
    DEFAULT_STEP_BUDGET, Receipt, Tx, call_view, execute_transaction, register_native,
    transcript_entry,
)
from .evm.state import WorldState, to_address

OWNER = to_address(0x10000000000000000000000000000000000000A1)
ATTACKER = to_address(0x20000000000000000000000000000000000000A2)
DEX = to_address(0x30000000000000000000000000000000000000D3)
CEX = to_address(0x40000000000000000000000000000000000000C4)
FUNDING = 10**24

INSUFFICIENT_SUPPLY = "insufficient supply"
INSUFFICIENT_INIT = "insufficient initialization"
SEEDING_FAILED = f"{INSUFFICIENT_INIT}: seeding failed"
UNREADABLE_BALANCE = f"{INSUFFICIENT_INIT}: balanceOf unreadable"


class HarnessError(Exception):
    pass


class TokenMissing(HarnessError):
    pass


class DeployFailed(HarnessError):
    pass


class Outcome(enum.Enum):
    Confirmed = "Confirmed"
    NotExploitable = "NotExploitable"
    Inconclusive = "Inconclusive"


@dataclass(frozen=True)
class HarnessConfig:
    seed_amount: int = 1
    attack_amount: int = 100
    decode_policy: DecodePolicy = DecodePolicy.Flawed
    step_budget: int = DEFAULT_STEP_BUDGET


@dataclass(frozen=True)
class TokenProbe:
    total_supply: int | None  # None means unreadable
    owner_balance: int | None
    decimals_ignored: str = "amounts are raw token units; decimals() is not consulted"

    def to_json(self) -> dict:
        def fmt(v):
            return "unreadable" if v is None else str(v)
        return {"total_supply": fmt(self.total_supply), "owner_balance": fmt(self.owner_balance),
                "decimals_ignored": self.decimals_ignored}


@dataclass
class Harness:
    world: WorldState
    owner: bytes = OWNER
    attacker: bytes = ATTACKER
    dex_addr: bytes = DEX
    cex_addr: bytes = CEX
    config: HarnessConfig = field(default_factory=HarnessConfig)
    token_addr: bytes | None = None
    transcript: list[tuple[Tx, Receipt]] = field(default_factory=list)
    premark: str | None = None

    def send(self, sender: bytes, to: bytes | None, data: bytes) -> Receipt:
        tx = Tx(sender, to, data, 0, self.config.step_budget)
        self.world, receipt = execute_transaction(self.world, tx)
        self.transcript.append((tx, receipt))
        return receipt

    def view(self, to: bytes, data: bytes, sender: bytes | None = None) -> Receipt:
        return call_view(self.world, sender or self.owner, to, data, self.config.step_budget)

    def balance_of(self, who: bytes) -> int | None:
        self._need_token()
        r = self.view(self.token_addr, encode_call("balanceOf(address)", who))
        return decode_word(r.returndata) if r.ok else None

    def credited(self, user: bytes) -> int:
        self._need_token()
        r = self.view(self.dex_addr, TOKENS.value + bytes(12) + self.token_addr + bytes(12) + user)
        return decode_word(r.returndata) or 0

    def balances(self) -> dict[str, int | None]:
        return {name: self.balance_of(addr) for name, addr in
                (("owner", self.owner), ("attacker", self.attacker),
                 ("dex", self.dex_addr), ("cex", self.cex_addr))}

    def transcript_json(self) -> list[dict]:
        return [transcript_entry(tx, r) for tx, r in self.transcript]

    def _need_token(self) -> None:
        if self.token_addr is None:
            raise TokenMissing("no token deployed in this harness")


def setup(genesis: list[dict] | None = None, config: HarnessConfig | None = None) -> Harness:
    config = config or HarnessConfig()
    entries = {OWNER: {"address": "0x" + OWNER.hex(), "balance": FUNDING},
               ATTACKER: {"address": "0x" + ATTACKER.hex(), "balance": FUNDING}}
    for entry in genesis or []:
        entries[to_address(entry["address"])] = entry
    world = WorldState.from_genesis(list(entries.values()))
    world = register_native(world, DEX, NativeDex(config.decode_policy))
    return Harness(world, config=config)


def deploy_token(h: Harness, payload: bytes) -> tuple[Harness, TokenProbe]:
    receipt = h.send(h.owner, None, bytes(payload))
    if not receipt.ok or receipt.created is None:
        raise DeployFailed(receipt.error or "constructor failed")
    h.token_addr = receipt.created
    supply = h.view(h.token_addr, encode_call("totalSupply()"))
    total = decode_word(supply.returndata) if supply.ok else None
    owner_balance = h.balance_of(h.owner)
    if owner_balance is None:
        h.premark = UNREADABLE_BALANCE
    elif owner_balance == 0:
        h.premark = INSUFFICIENT_SUPPLY
    return h, TokenProbe(total, owner_balance)


@dataclass
class ExploitResult:
    attack: str
    verdict: Outcome
    reason: str | None = None
    evidence: dict = field(default_factory=dict)
    transcript: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"attack": self.attack, "verdict": self.verdict.value, "reason": self.reason,
                "evidence": self.evidence, "transcript": self.transcript}


def _fmt(balances: dict) -> dict:
    return {k: (None if v is None else str(v)) for k, v in balances.items()}


def _seed(h: Harness, evidence: dict) -> bool:
    amount = h.config.seed_amount
    r = h.send(h.owner, h.token_addr, encode_call("transfer(address,uint256)", h.attacker, amount))
    got = h.balance_of(h.attacker)
    evidence["seed_status"] = r.status
    evidence["attacker_pre_balance"] = None if got is None else str(got)
    return r.ok and got == amount


def _inconclusive(attack: str, h: Harness, reason: str, evidence: dict) -> ExploitResult:
    return ExploitResult(attack, Outcome.Inconclusive, reason, evidence, h.transcript_json())


def run_type1(h: Harness) -> ExploitResult:
    h._need_token()
    evidence = {"token": "0x" + h.token_addr.hex(), "pre": _fmt(h.balances()),
                "decode_policy": h.config.decode_policy.value}
    if h.premark:
        return _inconclusive("TypeI", h, h.premark, evidence)
    if not _seed(h, evidence):
        return _inconclusive("TypeI", h, SEEDING_FAILED, evidence)
    amount = h.config.attack_amount
    approve = h.send(h.attacker, h.token_addr, encode_call("approve(address,uint256)", h.dex_addr, amount))
    evidence["approve_status"] = approve.status
    # what the DEX's nested call will see, probed without side effects
    probe = h.view(h.token_addr, encode_call("transferFrom(address,address,uint256)",
                                             h.attacker, h.dex_addr, amount), sender=h.dex_addr)
    evidence["nested_transfer_from"] = {"status": probe.status,
                                        "returndata": "0x" + probe.returndata.hex()}
    deposit = h.send(h.attacker, h.dex_addr,
                     encode_call("depositToken(address,uint256)", h.token_addr, amount))
    credited = h.credited(h.attacker)
    evidence.update({
        "deposit_status": deposit.status,
        "credited": str(credited),
        "post": _fmt(h.balances()),
    })
    verdict = Outcome.Confirmed if deposit.ok and credited == amount else Outcome.NotExploitable
    return ExploitResult("TypeI", verdict, None, evidence, h.transcript_json())


def run_type2(h: Harness) -> ExploitResult:
    h._need_token()
    evidence = {"token": "0x" + h.token_addr.hex(), "pre": _fmt(h.balances())}
    if h.premark:
        return _inconclusive("TypeII", h, h.premark, evidence)
    if not _seed(h, evidence):
        return _inconclusive("TypeII", h, SEEDING_FAILED, evidence)
    amount = h.config.attack_amount
    cex_before = h.balance_of(h.cex_addr)
    r = h.send(h.attacker, h.token_addr, encode_call("transfer(address,uint256)", h.cex_addr, amount))
    cex_after = h.balance_of(h.cex_addr)
    evidence.update({
        "transfer_status": r.status,
        "declared_value": str(amount),
        "transfer_returndata": "0x" + r.returndata.hex(),
        # the status-only reading: any status-1 transfer would be credited
        "status_only_verdict": (Outcome.Confirmed if r.ok else Outcome.NotExploitable).value,
        "post": _fmt(h.balances()),
    })
    if cex_before is None or cex_after is None:
        return _inconclusive("TypeII", h, UNREADABLE_BALANCE, evidence)
    delta = cex_after - cex_before
    evidence["cex_delta"] = str(delta)
    if not r.ok:
        verdict = Outcome.NotExploitable
    else:
        verdict = Outcome.Confirmed if delta < amount else Outcome.NotExploitable
    return ExploitResult("TypeII", verdict, None, evidence, h.transcript_json())


FINAL_CONFIRMED = "confirmed"
FINAL_INCONCLUSIVE = "inconclusive"
FINAL_CLEARED = "cleared"
FINAL_NOT_FLAGGED = "not-flagged"


@dataclass
class Validation:
    type1: ExploitResult | None = None
    type2: ExploitResult | None = None
    probe: TokenProbe | None = None

    @property
    def results(self) -> list[ExploitResult]:
        return [r for r in (self.type1, self.type2) if r is not None]

    @property
    def final(self) -> str:
        results = self.results
        if not results:
            return FINAL_NOT_FLAGGED
        if any(r.verdict is Outcome.Confirmed for r in results):
            return FINAL_CONFIRMED
        if any(r.verdict is Outcome.Inconclusive for r in results):
            return FINAL_INCONCLUSIVE
        return FINAL_CLEARED

    def to_json(self) -> dict:
        return {
            "type1": self.type1.to_json() if self.type1 else None,
            "type2": self.type2.to_json() if self.type2 else None,
            "probe": self.probe.to_json() if self.probe else None,
            "final": self.final,
        }


def _attempt(attack: str, payload: bytes, config: HarnessConfig, genesis) -> tuple[ExploitResult, TokenProbe | None]:
    h = setup(genesis, config)
    try:
        h, probe = deploy_token(h, payload)
    except DeployFailed as exc:
        return ExploitResult(attack, Outcome.Inconclusive, "deploy failed",
                             {"error": str(exc)}, h.transcript_json()), None
    runner = run_type1 if attack == "TypeI" else run_type2
    return runner(h), probe


def validate(finding: StaticFinding, payload: bytes, config: HarnessConfig | None = None,
             attacks: tuple[str, ...] = ("type1", "type2"), genesis=None) -> Validation:
    """Run each attack the finding makes a candidate for, on its own harness."""
    config = config or HarnessConfig()
    out = Validation()
    if finding.type1_candidate and "type1" in attacks:
        out.type1, out.probe = _attempt("TypeI", payload, config, genesis)
    if finding.type2_candidate and "type2" in attacks:
        out.type2, probe = _attempt("TypeII", payload, config, genesis)
        out.probe = out.probe or probe
    return out


def with_overrides(config: HarnessConfig, overrides: dict | None) -> HarnessConfig:
    if not overrides:
        return config
    allowed = {"seed_amount", "attack_amount"}
    unknown = set(overrides) - allowed
    if unknown:
        raise ValueError(f"unknown harness override(s): {sorted(unknown)}")
    return replace(config, **overrides)
