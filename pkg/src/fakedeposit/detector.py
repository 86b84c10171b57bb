"""Static fake-deposit detector.

Three stages: check that the ERC-20 interface is dispatched, locate the
storage keys that transfer/transferFrom read and then write, and verify
that every comparison guarding those keys has an aborting sibling branch.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .bytecode.selectors import ERC20, ERC20_SIGNATURES, Selector, dispatch_selectors
from .symexec.engine import ExploreConfig, Path, explore
from .symexec.terms import StorageRead, Term, sha3_depth, walk

MANDATORY = tuple(ERC20_SIGNATURES)
ANALYZED = ("transfer", "transferFrom")


class DetectError(ValueError):
    pass


class Verdict(enum.Enum):
    Compliant = "Compliant"
    Vulnerable = "Vulnerable"
    Indeterminate = "Indeterminate"
    Skipped = "Skipped"  # no read-then-written key, so nothing to verify


@dataclass(frozen=True)
class InterfaceReport:
    present: dict[str, bool]
    extraction_heuristic: bool = False

    def selector(self, name: str) -> Selector:
        return ERC20[name]

    def to_json(self) -> dict:
        return {
            "present": {name: self.present[name] for name in MANDATORY},
            "selectors": {name: "0x" + ERC20[name].hex for name in MANDATORY},
            "extraction_heuristic": self.extraction_heuristic,
        }


def check_interface(runtime: bytes) -> InterfaceReport:
    found, heuristic = dispatch_selectors(runtime)
    return InterfaceReport({name: ERC20[name] in found for name in MANDATORY}, heuristic)


@dataclass(frozen=True)
class KeyEvidence:
    key: Term
    read_offset: int
    write_offset: int
    path: int


@dataclass(frozen=True)
class KeyStorageMap:
    function: str
    balance_keys: tuple[Term, ...]
    allowance_keys: tuple[Term, ...] = ()
    evidence: tuple[KeyEvidence, ...] = ()

    @property
    def keys(self) -> tuple[Term, ...]:
        return self.balance_keys + self.allowance_keys

    @property
    def empty(self) -> bool:
        return not self.balance_keys and not self.allowance_keys


def locate_key_storage(paths: list[Path], function: str) -> KeyStorageMap:
    balance: dict[Term, None] = {}
    allowance: dict[Term, None] = {}
    evidence = []
    for path in paths:
        seen = set()
        for read in path.storage_reads:
            if read.key in seen:
                continue
            write = next((w for w in path.storage_writes
                          if w.key == read.key and w.index > read.index), None)
            if write is None:
                continue
            seen.add(read.key)
            target = allowance if function == "transferFrom" and sha3_depth(read.key) >= 2 else balance
            if read.key not in target:
                target[read.key] = None
                evidence.append(KeyEvidence(read.key, read.offset, write.offset, path.id))
    return KeyStorageMap(function, tuple(balance), tuple(allowance), tuple(evidence))


@dataclass(frozen=True)
class ProtectedNode:
    path: int
    iszero_offset: int
    compared_term: Term
    guards_key: Term
    jumpi_offset: int
    fork_id: int
    guarded: bool


@dataclass(frozen=True)
class Unprotected:
    function: str
    path: int
    terminator: str
    reason: str
    keys: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"function": self.function, "path": self.path, "terminator": self.terminator,
                "reason": self.reason, "keys": list(self.keys)}


def _guarded_key(term: Term, keys: tuple[Term, ...]) -> Term | None:
    for sub in walk(term):
        for key in keys:
            if sub == key or (isinstance(sub, StorageRead) and sub.key == key):
                return key
    return None


def protected_nodes(path: Path, keys: tuple[Term, ...], siblings) -> list[ProtectedNode]:
    """ISZERO steps over key-derived terms whose result feeds a forking JUMPI."""
    decisions = {d.index: d for d in path.decisions}
    nodes = []
    trace = path.trace
    for i, step in enumerate(trace):
        if step.name != "ISZERO":
            continue
        compared = step.args[0]
        key = _guarded_key(compared, keys)
        if key is None:
            continue
        result = step.stack[-1]
        for j in range(i + 1, len(trace)):
            later = trace[j]
            if later.name == "JUMPI" and any(t == result for t in walk(later.args[1])):
                decision = decisions.get(j)
                if decision is not None:
                    guarded = any(p.terminator.throws for p in siblings(decision))
                    nodes.append(ProtectedNode(path.id, step.offset, compared, key,
                                               later.offset, decision.fork_id, guarded))
                break
    return nodes


def verify_required_throw(paths: list[Path], key_map: KeyStorageMap,
                          ) -> tuple[Verdict, list[Unprotected], list[ProtectedNode]]:
    if key_map.empty:
        return Verdict.Skipped, [], []
    forks: dict[int, dict[bool, list[Path]]] = {}
    for p in paths:
        for d in p.decisions:
            forks.setdefault(d.fork_id, {True: [], False: []})[d.taken].append(p)

    def siblings(decision):
        return forks[decision.fork_id][not decision.taken]

    keys = key_map.keys
    balance = set(key_map.balance_keys)
    unprotected: list[Unprotected] = []
    all_nodes: list[ProtectedNode] = []
    for p in paths:
        if not p.terminator.normal:
            continue
        if not any(w.key in balance for w in p.storage_writes):
            continue
        nodes = protected_nodes(p, keys, siblings)
        all_nodes.extend(nodes)
        if not nodes:
            unprotected.append(Unprotected(key_map.function, p.id, p.terminator.value,
                                           "no protected node"))
            continue
        open_keys = tuple(dict.fromkeys(repr(n.guards_key) for n in nodes if not n.guarded))
        if open_keys:
            unprotected.append(Unprotected(key_map.function, p.id, p.terminator.value,
                                           "protected node without aborting sibling", open_keys))
    if unprotected:
        return Verdict.Vulnerable, unprotected, all_nodes
    if any(p.terminator.inconclusive for p in paths):
        return Verdict.Indeterminate, [], all_nodes
    return Verdict.Compliant, [], all_nodes


@dataclass
class FunctionAnalysis:
    function: str
    present: bool
    verdict: Verdict
    paths: list[Path] = field(default_factory=list)
    key_map: KeyStorageMap | None = None
    unprotected: list[Unprotected] = field(default_factory=list)
    nodes: list[ProtectedNode] = field(default_factory=list)

    def to_json(self) -> dict:
        km = self.key_map
        return {
            "present": self.present,
            "verdict": self.verdict.value,
            "paths": len(self.paths),
            "terminators": sorted({p.terminator.value for p in self.paths}),
            "balance_keys": [repr(k) for k in km.balance_keys] if km else [],
            "allowance_keys": [repr(k) for k in km.allowance_keys] if km else [],
            "protected_nodes": len(self.nodes),
        }


@dataclass
class StaticFinding:
    id: str
    type1_candidate: bool
    type2_candidate: bool
    interface: InterfaceReport
    unprotected_paths: list[Unprotected] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    functions: dict[str, FunctionAnalysis] = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return self.type1_candidate or self.type2_candidate

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "type1_candidate": self.type1_candidate,
            "type2_candidate": self.type2_candidate,
            "interface": self.interface.to_json(),
            "functions": {name: fa.to_json() for name, fa in self.functions.items()},
            "unprotected_paths": [u.to_json() for u in self.unprotected_paths],
            "notes": list(self.notes),
        }


def analyze_function(runtime: bytes, function: str, cfg: ExploreConfig) -> FunctionAnalysis:
    paths = explore(runtime, ERC20[function], cfg)
    key_map = locate_key_storage(paths, function)
    verdict, unprotected, nodes = verify_required_throw(paths, key_map)
    if verdict is Verdict.Skipped and any(p.terminator.inconclusive for p in paths):
        verdict = Verdict.Indeterminate
    return FunctionAnalysis(function, True, verdict, paths, key_map, unprotected, nodes)


def detect(runtime: bytes, cfg: ExploreConfig | None = None, id: str = "") -> StaticFinding:
    if not isinstance(runtime, (bytes, bytearray)):
        raise DetectError("runtime must be bytes")
    runtime = bytes(runtime)
    if not runtime:
        raise DetectError("empty bytecode")
    cfg = cfg or ExploreConfig()
    iface = check_interface(runtime)
    finding = StaticFinding(id, False, False, iface)
    if iface.extraction_heuristic:
        finding.notes.append("selectors recovered by the PUSH4 heuristic")
    for fn in ANALYZED:
        if not iface.present[fn]:
            finding.functions[fn] = FunctionAnalysis(fn, False, Verdict.Skipped)
            finding.type1_candidate = True
            finding.notes.append(f"{fn} is not dispatched; calls reach the fallback")
            continue
        fa = analyze_function(runtime, fn, cfg)
        finding.functions[fn] = fa
        if fa.verdict is Verdict.Vulnerable:
            finding.type2_candidate = True
            finding.unprotected_paths.extend(fa.unprotected)
        elif fa.verdict is Verdict.Indeterminate:
            finding.type2_candidate = True
            finding.notes.append(f"{fn}: exploration hit a budget or unsupported opcode; flagged conservatively")
        if fa.key_map is not None and not fa.key_map.balance_keys:
            finding.type1_candidate = True
            finding.notes.append(f"{fn} writes no balance it reads (no-op body); heuristic Type-I candidate")
    return finding
