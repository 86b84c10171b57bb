"""Command line: scan, validate, fetch, asm, report.

Exit codes: 0 when the run finished with nothing confirmed, 2 when at least one
contract was confirmed exploitable, 1 on an operational error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path

from . import __version__, corpus, report
from .bytecode.asm import AsmError, assemble_fixture
from .corpus import CorpusEntry, CorpusError
from .dex import DecodePolicy
from .fetch import API_KEY_ENV, EtherscanClient, FetchError, FetchSource, fetch_entry
from .pipeline import PipelineConfig, scan_entry, validate_entry
from .symexec.engine import ExploreConfig
from .validator import HarnessConfig

EXIT_OK, EXIT_ERROR, EXIT_CONFIRMED = 0, 1, 2
DEFAULT_API = "https://api.etherscan.io/api"


class UsageError(Exception):
    pass


def collect_entries(inputs: list[str], corpus_path: str | None) -> list[CorpusEntry]:
    entries: list[CorpusEntry] = []
    if corpus_path:
        entries.extend(corpus.load(corpus_path))
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            entries.extend(corpus.load(path))
        elif path.suffix in (".json", ".jsonl"):
            entries.extend(corpus.load(path))
        else:
            entries.append(corpus.from_file(path))
    if not entries:
        raise UsageError("no inputs: pass bytecode files or --corpus")
    return sorted(entries, key=lambda e: e.id)


def pipeline_config(args) -> PipelineConfig:
    defaults = ExploreConfig()
    explore = replace(defaults,
                      max_paths=args.max_paths if args.max_paths is not None else defaults.max_paths,
                      loop_bound=args.loop_bound if args.loop_bound is not None else defaults.loop_bound)
    attacks = ("type1", "type2")
    if getattr(args, "type1_only", False):
        attacks = ("type1",)
    elif getattr(args, "type2_only", False):
        attacks = ("type2",)
    policy = DecodePolicy.Strict if getattr(args, "strict_dex", False) else DecodePolicy.Flawed
    return PipelineConfig(explore, HarnessConfig(decode_policy=policy), attacks,
                          dump_paths=bool(args.dump_paths), timings=args.timings)


def run_batch(command: str, entries: list[CorpusEntry], config: PipelineConfig,
              jobs: int = 1) -> tuple[report.Report, list[dict]]:
    step = scan_entry if command == "scan" else validate_entry
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(partial(step, config=config), entries))
    else:
        results = [step(e, config) for e in entries]
    dumps = [d for _, ds in results for d in ds]
    return report.Report(command, [r for r, _ in results]), dumps


def _emit(rep: report.Report, out: str | None) -> None:
    text = rep.serialize()
    if out == "-":
        sys.stdout.write(text)
        return
    if out:
        Path(out).write_text(text)
    print(report.summary(rep))


def cmd_pipeline(args) -> int:
    entries = collect_entries(args.inputs, args.corpus)
    config = pipeline_config(args)
    rep, dumps = run_batch(args.command, entries, config, args.jobs)
    if args.dump_paths:
        Path(args.dump_paths).write_text("".join(json.dumps(d, sort_keys=True) + "\n" for d in dumps))
    _emit(rep, args.json)
    return EXIT_CONFIRMED if rep.confirmed else EXIT_OK


def cmd_fetch(args) -> int:
    source = FetchSource(args.base_url, os.environ.get(API_KEY_ENV) or None, args.rate_limit)
    client = EtherscanClient(source)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = False
    for address in args.addresses:
        try:
            entry = fetch_entry(address, client)
        except FetchError as exc:
            print(f"{address}: {type(exc).__name__}: {exc}", file=sys.stderr)
            failed = True
            continue
        target = out / f"{entry.id}.json"
        target.write_text(json.dumps(entry.to_json(), indent=2, sort_keys=True) + "\n")
        print(target)
    return EXIT_ERROR if failed else EXIT_OK


def parse_header(text: str) -> tuple[str | None, bytes, dict]:
    """Read `# label:`, `# args:` and `# harness:` lines from a fixture source."""
    label, args, harness = None, b"", {}
    for line in text.splitlines():
        line = line.strip()
        if not line.startswith("#"):
            continue
        key, _, value = line[1:].strip().partition(":")
        value = value.strip()
        if key == "label":
            label = value
        elif key == "args":
            args = bytes.fromhex(value.removeprefix("0x"))
        elif key == "harness":
            for pair in value.split(","):
                k, _, v = pair.strip().partition("=")
                harness[k] = int(v, 0)
    return label, args, harness


def asm_entry(path: Path) -> CorpusEntry:
    text = path.read_text()
    label, args, harness = parse_header(text)
    image = assemble_fixture(text)
    return CorpusEntry(path.stem, image.payload + args, image.runtime, label, harness)


def cmd_asm(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for src in args.sources:
        path = Path(src)
        entry = asm_entry(path)
        (out / f"{entry.id}.bin").write_text(entry.creation_payload.hex() + "\n")
        (out / f"{entry.id}.bin-runtime").write_text(entry.runtime.hex() + "\n")
        entries.append(entry)
    if args.bundle:
        corpus.save(args.bundle, entries)
    return EXIT_OK


def cmd_report(args) -> int:
    rep = report.parse(Path(args.report).read_text())
    _emit(rep, args.json)
    return EXIT_CONFIRMED if rep.confirmed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fakedeposit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("scan", "static detection only"), ("validate", "detection then exploit replay")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("inputs", nargs="*", help="bytecode files, corpus JSON/JSONL files or directories")
        p.add_argument("--corpus", help="corpus file or directory")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--max-paths", type=int)
        p.add_argument("--loop-bound", type=int)
        p.add_argument("--dump-paths", metavar="FILE", help="write explored paths as JSON lines")
        p.add_argument("--json", metavar="OUT", help="write the report JSON ('-' for stdout)")
        p.add_argument("--timings", action="store_true", help="record wall-clock timings in the report")
        if name == "validate":
            only = p.add_mutually_exclusive_group()
            only.add_argument("--type1-only", action="store_true")
            only.add_argument("--type2-only", action="store_true")
            p.add_argument("--strict-dex", action="store_true",
                           help="DEX requires a returned true word from transferFrom")
        p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fetch", help=f"download creation code (API key from ${API_KEY_ENV})")
    p.add_argument("addresses", nargs="+")
    p.add_argument("--base-url", default=DEFAULT_API)
    p.add_argument("--rate-limit", type=float, default=5.0, help="requests per second")
    p.add_argument("--out", default=".", help="directory for <address>.json entries")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("asm", help="assemble fixture sources into hex files and corpus entries")
    p.add_argument("sources", nargs="+")
    p.add_argument("--out", default=".")
    p.add_argument("--bundle", metavar="JSONL", help="also write all entries as a JSON-lines corpus")
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("report", help="re-read a report and print its summary")
    p.add_argument("report")
    p.add_argument("--json", metavar="OUT")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except (UsageError, CorpusError, AsmError, report.ReportError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
