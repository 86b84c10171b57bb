"""Corpus entries and their on-disk JSON forms (single file or JSON lines)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .bytecode.disasm import parse_hex

LABELS = ("compliant", "type1", "type2", "fp-safemath", "fp-stringent", "fp-nonstd",
          "fn-init", "fn-supply")


class CorpusError(ValueError):
    pass


def hexstr(data: bytes) -> str:
    return "0x" + bytes(data).hex()


@dataclass(frozen=True)
class CorpusEntry:
    id: str
    creation_payload: bytes | None = None
    runtime: bytes | None = None
    label: str | None = None
    harness: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.creation_payload is None and self.runtime is None:
            raise CorpusError(f"{self.id}: needs creation_payload or runtime")
        if self.label is not None and self.label not in LABELS:
            raise CorpusError(f"{self.id}: unknown label {self.label!r}")

    def to_json(self) -> dict:
        out: dict = {"id": self.id}
        if self.creation_payload is not None:
            out["creation_payload"] = hexstr(self.creation_payload)
        if self.runtime is not None:
            out["runtime"] = hexstr(self.runtime)
        if self.label is not None:
            out["label"] = self.label
        if self.harness:
            out["harness"] = dict(sorted(self.harness.items()))
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusEntry":
        if not isinstance(obj, dict) or "id" not in obj:
            raise CorpusError("corpus entry without id")

        def blob(key):
            value = obj.get(key)
            if value is None:
                return None
            try:
                return parse_hex(value)
            except ValueError as exc:
                raise CorpusError(f"{obj['id']}: bad {key}: {exc}") from None

        return cls(str(obj["id"]), blob("creation_payload"), blob("runtime"),
                   obj.get("label"), dict(obj.get("harness") or {}))


def dumps(entries: list[CorpusEntry]) -> str:
    return "".join(json.dumps(e.to_json(), sort_keys=True) + "\n" for e in entries)


def loads(text: str) -> list[CorpusEntry]:
    """Accept one JSON entry, a JSON array of entries, or JSON lines."""
    try:
        whole = json.loads(text)
    except json.JSONDecodeError:
        whole = None
    if isinstance(whole, dict):
        return [CorpusEntry.from_json(whole)]
    if isinstance(whole, list):
        return [CorpusEntry.from_json(o) for o in whole]
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(CorpusEntry.from_json(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None
    return out


def load(path: str | Path) -> list[CorpusEntry]:
    """Read a corpus file, or every *.json / *.jsonl file in a directory."""
    path = Path(path)
    if path.is_dir():
        entries = []
        for child in sorted(path.iterdir()):
            if child.suffix in (".json", ".jsonl"):
                entries.extend(loads(child.read_text()))
        return entries
    return loads(path.read_text())


def save(path: str | Path, entries: list[CorpusEntry]) -> None:
    Path(path).write_text(dumps(entries))


def from_fixture(fixture) -> CorpusEntry:
    return CorpusEntry(fixture.name, fixture.payload, fixture.runtime, fixture.label,
                       dict(fixture.harness))


def from_file(path: str | Path) -> CorpusEntry:
    """A bare hex file is taken as a creation payload; `.bin-runtime` as runtime."""
    path = Path(path)
    if path.suffix in (".json", ".jsonl"):
        entries = loads(path.read_text())
        if len(entries) != 1:
            raise CorpusError(f"{path}: expected one entry, found {len(entries)}")
        return entries[0]
    text = path.read_text().strip()
    code = parse_hex(text) if text else b""
    if path.name.endswith(".bin-runtime"):
        return CorpusEntry(path.name[:-len(".bin-runtime")], runtime=code)
    return CorpusEntry(path.stem, creation_payload=code)
