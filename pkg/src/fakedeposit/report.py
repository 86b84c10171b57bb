"""Versioned JSON report: one entry per contract plus aggregate counts."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field

from . import __version__

SCHEMA = 1
ERROR = "error"
# scan-only verdicts; validate uses the validator's FINAL_* strings
FLAGGED = "flagged"
NOT_FLAGGED = "not-flagged"
CONFIRMED = "confirmed"


class ReportError(ValueError):
    pass


@dataclass
class ContractReport:
    id: str
    final: str
    label: str | None = None
    interface: dict | None = None
    finding: dict | None = None
    exploits: dict | None = None
    error: str | None = None
    timings: dict | None = None

    @property
    def flagged(self) -> bool:
        f = self.finding or {}
        return bool(f.get("type1_candidate") or f.get("type2_candidate"))

    def to_json(self) -> dict:
        return {"id": self.id, "label": self.label, "interface": self.interface,
                "finding": self.finding, "exploits": self.exploits, "final": self.final,
                "error": self.error, "timings": self.timings}

    @classmethod
    def from_json(cls, obj: dict) -> "ContractReport":
        try:
            return cls(id=obj["id"], final=obj["final"], label=obj.get("label"),
                       interface=obj.get("interface"), finding=obj.get("finding"),
                       exploits=obj.get("exploits"), error=obj.get("error"),
                       timings=obj.get("timings"))
        except (KeyError, TypeError) as exc:
            raise ReportError(f"bad contract entry: {exc}") from None


@dataclass
class Report:
    command: str
    contracts: list[ContractReport] = field(default_factory=list)
    tool_version: str = __version__
    schema: int = SCHEMA

    @property
    def aggregate(self) -> dict:
        verdicts = Counter(c.final for c in self.contracts)
        return {
            "total": len(self.contracts),
            "static_flagged": sum(c.flagged for c in self.contracts),
            "verdicts": dict(sorted(verdicts.items())),
        }

    @property
    def confirmed(self) -> int:
        return sum(c.final == CONFIRMED for c in self.contracts)

    def to_json(self) -> dict:
        return {"schema": self.schema, "tool_version": self.tool_version, "command": self.command,
                "contracts": [c.to_json() for c in self.contracts], "aggregate": self.aggregate}

    def serialize(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def parse(text: str) -> Report:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ReportError(f"not JSON: {exc}") from None
    if not isinstance(obj, dict) or obj.get("schema") != SCHEMA:
        raise ReportError(f"unsupported report schema {obj.get('schema') if isinstance(obj, dict) else None!r}")
    report = Report(obj["command"], [ContractReport.from_json(c) for c in obj.get("contracts", [])],
                    obj.get("tool_version", ""), obj["schema"])
    if "aggregate" in obj and obj["aggregate"] != report.aggregate:
        raise ReportError("aggregate counts disagree with the contract entries")
    return report


def summary(report: Report) -> str:
    """Human-readable table: one row per contract, then the totals."""
    rows = [(c.id, c.label or "-", c.final, c.error or "") for c in report.contracts]
    width = max([len(r[0]) for r in rows] + [2])
    lines = [f"{'id':<{width}}  {'label':<12}  {'verdict':<12}  note"]
    for id_, label, final, note in rows:
        lines.append(f"{id_:<{width}}  {label:<12}  {final:<12}  {note}".rstrip())
    agg = report.aggregate
    counts = ", ".join(f"{k}={v}" for k, v in agg["verdicts"].items())
    lines.append(f"total={agg['total']} static_flagged={agg['static_flagged']} {counts}")
    return "\n".join(lines)
