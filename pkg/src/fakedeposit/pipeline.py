"""Per-contract scan and validate steps, kept free of shared state so they can
run in worker processes."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .corpus import CorpusEntry
from .detector import DetectError, StaticFinding, detect
from .report import ERROR, FLAGGED, NOT_FLAGGED, ContractReport
from .symexec.engine import ExploreConfig
from .validator import (
    ExploitResult, HarnessConfig, Outcome, Validation, setup, validate, with_overrides,
)

NO_CREATION_CODE = "no creation code"
# flagged, but every applicable attack was filtered out by the attack selection
SKIPPED = "skipped"


@dataclass(frozen=True)
class PipelineConfig:
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    attacks: tuple[str, ...] = ("type1", "type2")
    dump_paths: bool = False
    timings: bool = False


class EntryError(Exception):
    pass


def resolve_runtime(entry: CorpusEntry, config: HarnessConfig) -> bytes:
    """The entry's runtime, deploying its creation payload when none is given."""
    if entry.runtime is not None:
        return entry.runtime
    if not entry.creation_payload:
        raise EntryError("empty bytecode")
    h = setup(config=config)
    receipt = h.send(h.owner, None, entry.creation_payload)
    if not receipt.ok or receipt.created is None:
        raise EntryError(f"deploy failed: {receipt.error or 'constructor failed'}")
    return h.world.get(receipt.created).code


def _static(entry: CorpusEntry, config: PipelineConfig, timings: dict
            ) -> tuple[StaticFinding, list[dict]]:
    t0 = time.perf_counter()
    runtime = resolve_runtime(entry, config.harness)
    try:
        finding = detect(runtime, config.explore, id=entry.id)
    except DetectError as exc:
        raise EntryError(str(exc)) from None
    timings["detect_s"] = round(time.perf_counter() - t0, 6)
    dumps = []
    if config.dump_paths:
        for name, fa in finding.functions.items():
            for p in fa.paths:
                dumps.append({"id": entry.id, "function": name, **p.to_json()})
    return finding, dumps


def _finding_json(finding: StaticFinding) -> tuple[dict, dict]:
    body = finding.to_json()
    return body.pop("interface"), body


def scan_entry(entry: CorpusEntry, config: PipelineConfig) -> tuple[ContractReport, list[dict]]:
    timings: dict = {}
    try:
        finding, dumps = _static(entry, config, timings)
    except EntryError as exc:
        return ContractReport(entry.id, ERROR, entry.label, error=str(exc)), []
    interface, body = _finding_json(finding)
    final = FLAGGED if finding.flagged else NOT_FLAGGED
    return ContractReport(entry.id, final, entry.label, interface, body,
                          timings=timings if config.timings else None), dumps


def _no_creation(finding: StaticFinding, attacks) -> Validation:
    out = Validation()
    if finding.type1_candidate and "type1" in attacks:
        out.type1 = ExploitResult("TypeI", Outcome.Inconclusive, NO_CREATION_CODE)
    if finding.type2_candidate and "type2" in attacks:
        out.type2 = ExploitResult("TypeII", Outcome.Inconclusive, NO_CREATION_CODE)
    return out


def validate_entry(entry: CorpusEntry, config: PipelineConfig) -> tuple[ContractReport, list[dict]]:
    timings: dict = {}
    t0 = time.perf_counter()
    try:
        finding, dumps = _static(entry, config, timings)
        harness = with_overrides(config.harness, entry.harness)
    except (EntryError, ValueError) as exc:
        return ContractReport(entry.id, ERROR, entry.label, error=str(exc)), []
    if entry.creation_payload is None:
        result = _no_creation(finding, config.attacks)
    else:
        result = validate(finding, entry.creation_payload, harness, config.attacks)
    timings["total_s"] = round(time.perf_counter() - t0, 6)
    interface, body = _finding_json(finding)
    exploits = result.to_json()
    exploits.pop("final")
    final = SKIPPED if finding.flagged and not result.results else result.final
    return ContractReport(entry.id, final, entry.label, interface, body, exploits,
                          timings=timings if config.timings else None), dumps
