"""Validate a corpus and print verdicts next to each entry's label.

Exits 1 if any entry's verdict disagrees with what its label predicts.
"""
import argparse
from pathlib import Path

from fakedeposit import corpus
from fakedeposit.cli import run_batch
from fakedeposit.pipeline import PipelineConfig

ROOT = Path(__file__).resolve().parent.parent

# label -> acceptable final verdicts
PREDICTED = {
    "compliant": {"not-flagged", "cleared"},
    "type1": {"confirmed"},
    "type2": {"confirmed"},
    "fp-safemath": {"cleared"},
    "fp-stringent": {"cleared"},
    "fp-nonstd": {"cleared"},
    "fn-init": {"inconclusive"},
    "fn-supply": {"inconclusive"},
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("corpus", nargs="?", type=Path, default=ROOT / "corpus" / "corpus.jsonl")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    rep, _ = run_batch("validate", corpus.load(args.corpus), PipelineConfig(), args.jobs)
    misses = 0
    for c in rep.contracts:
        expected = PREDICTED.get(c.label or "")
        ok = expected is None or c.final in expected
        misses += not ok
        print(f"{'ok  ' if ok else 'MISS'} {c.id:<28} {c.label or '-':<13} {c.final}")
    agg = rep.aggregate
    print(f"total={agg['total']} static_flagged={agg['static_flagged']} confirmed={rep.confirmed}")
    return 1 if misses else 0


if __name__ == "__main__":
    raise SystemExit(main())
