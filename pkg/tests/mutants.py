"""Behavior-preserving mutants of the compliant fixtures.

Two rewrites on the runtime section's source text: shuffle the dispatcher's
five-line compare-and-jump blocks, and pad random line gaps with
`JUMPDEST` or `PUSH1 x` / `POP`. Labels share a line with their JUMPDEST, so
no jump target is separated from its label.
"""
from __future__ import annotations

import random
from dataclasses import replace

from fakedeposit.fixtures import Fixture, compliant_throw, inlined_safemath

BASES = (compliant_throw, inlined_safemath)


def _dispatch_blocks(lines: list[str]) -> list[int]:
    starts = []
    for i in range(len(lines) - 4):
        if (lines[i] == "DUP1" and lines[i + 1].startswith("PUSH4 ") and lines[i + 2] == "EQ"
                and lines[i + 3].startswith("@") and lines[i + 4] == "JUMPI"):
            starts.append(i)
    return starts


def shuffle_dispatcher(lines: list[str], rng: random.Random) -> list[str]:
    starts = _dispatch_blocks(lines)
    blocks = [lines[s:s + 5] for s in starts]
    rng.shuffle(blocks)
    out = list(lines)
    for s, block in zip(starts, blocks):
        out[s:s + 5] = block
    return out


def pad(lines: list[str], rng: random.Random, rate: float) -> list[str]:
    out = []
    for line in lines:
        out.append(line)
        if rng.random() < rate:
            if rng.random() < 0.5:
                out.append("JUMPDEST")
            else:
                out += [f"PUSH1 0x{rng.randrange(256):02x}", "POP"]
    return out


def mutate(fixture: Fixture, rng: random.Random, name: str) -> Fixture:
    head, sep, runtime = fixture.source.partition(".section runtime\n")
    assert sep, "fixture source has no runtime section"
    lines = runtime.rstrip("\n").split("\n")
    if rng.random() < 0.8:
        lines = shuffle_dispatcher(lines, rng)
    lines = pad(lines, rng, rng.choice([0.02, 0.05, 0.15]))
    return replace(fixture, name=name, source=head + sep + "\n".join(lines) + "\n")


def mutants(n: int = 50, seed: int = 2020) -> list[Fixture]:
    rng = random.Random(seed)
    out = []
    for i in range(n):
        base = BASES[i % len(BASES)]()
        out.append(mutate(base, rng, f"{base.name}_mut{i:02d}"))
    return out
