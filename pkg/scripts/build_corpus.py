"""Regenerate corpus/: one annotated .asm source per fixture plus corpus.jsonl.

The JSON-lines bundle is produced by assembling the written .asm files,
so it is exactly what `fakedeposit asm` would emit for them.
"""
import argparse
from pathlib import Path

from fakedeposit import corpus
from fakedeposit.cli import asm_entry
from fakedeposit.fixtures import all_fixtures

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=ROOT / "corpus")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    entries = []
    for fx in all_fixtures():
        path = args.out / f"{fx.name}.asm"
        path.write_text(fx.annotated_source())
        entry = asm_entry(path)
        if entry != corpus.from_fixture(fx):
            raise SystemExit(f"{fx.name}: assembled entry differs from the fixture builder")
        entries.append(entry)
    corpus.save(args.out / "corpus.jsonl", entries)
    print(f"wrote {len(entries)} fixtures to {args.out}")


if __name__ == "__main__":
    main()
