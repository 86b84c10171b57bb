import json
import subprocess
import sys
from pathlib import Path

import pytest

from fakedeposit import corpus
from fakedeposit.cli import EXIT_CONFIRMED, EXIT_ERROR, EXIT_OK, asm_entry, main
from fakedeposit.fixtures import by_name
from fakedeposit.pipeline import NO_CREATION_CODE

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus" / "corpus.jsonl"


def write_entries(path, *names):
    corpus.save(path, [corpus.from_fixture(by_name(n)) for n in names])
    return str(path)


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_exit_code_ok_without_confirmed(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "compliant_throw", "stringent_throw")
    code, out = run(["validate", src], capsys)
    assert code == EXIT_OK
    assert "total=2" in out.out


def test_exit_code_two_with_confirmed(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "return_false_transfer")
    assert run(["validate", src], capsys)[0] == EXIT_CONFIRMED
    # scanning never confirms anything
    assert run(["scan", src], capsys)[0] == EXIT_OK


def test_json_to_stdout(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "missing_transfer_from", "compliant_throw")
    code, out = run(["scan", src, "--json", "-"], capsys)
    rep = json.loads(out.out)
    assert rep["schema"] == 1 and rep["command"] == "scan"
    verdicts = {c["id"]: c["final"] for c in rep["contracts"]}
    assert verdicts == {"missing_transfer_from": "flagged", "compliant_throw": "not-flagged"}
    assert [c["id"] for c in rep["contracts"]] == sorted(verdicts)


def test_type2_only_suppresses_type1(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "missing_transfer_from", "return_false_transfer")
    _, out = run(["validate", src, "--type2-only", "--json", "-"], capsys)
    rep = {c["id"]: c for c in json.loads(out.out)["contracts"]}
    assert rep["missing_transfer_from"]["final"] == "skipped"
    assert rep["missing_transfer_from"]["exploits"]["type1"] is None
    assert rep["return_false_transfer"]["final"] == "confirmed"


def test_mutually_exclusive_attack_flags(tmp_path):
    with pytest.raises(SystemExit):
        main(["validate", str(CORPUS), "--type1-only", "--type2-only"])


def test_strict_dex_clears_missing_transfer_from(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "missing_transfer_from")
    code, out = run(["validate", src, "--strict-dex", "--json", "-"], capsys)
    assert code == EXIT_OK and json.loads(out.out)["contracts"][0]["final"] == "cleared"


def test_runtime_only_entry_is_inconclusive(tmp_path, capsys):
    fx = by_name("return_false_transfer")
    (tmp_path / "tok.bin-runtime").write_text(fx.runtime.hex())
    code, out = run(["validate", str(tmp_path / "tok.bin-runtime"), "--json", "-"], capsys)
    (entry,) = json.loads(out.out)["contracts"]
    assert code == EXIT_OK and entry["final"] == "inconclusive"
    assert entry["exploits"]["type2"]["reason"] == NO_CREATION_CODE


def test_empty_bytecode_is_an_entry_error(tmp_path, capsys):
    (tmp_path / "empty.bin").write_text("")
    code, out = run(["scan", str(tmp_path / "empty.bin"), "--json", "-"], capsys)
    (entry,) = json.loads(out.out)["contracts"]
    assert code == EXIT_OK and entry["final"] == "error" and entry["error"] == "empty bytecode"


def test_operational_errors_exit_one(tmp_path, capsys):
    assert run(["scan"], capsys)[0] == EXIT_ERROR
    assert run(["scan", str(tmp_path / "missing.bin")], capsys)[0] == EXIT_ERROR
    (tmp_path / "bad.jsonl").write_text('{"id": "x"}\n')
    code, out = run(["scan", str(tmp_path / "bad.jsonl")], capsys)
    assert code == EXIT_ERROR and "error:" in out.err


def test_validate_is_deterministic_across_jobs(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(["validate", "--corpus", str(CORPUS), "--json", str(a)], capsys)
    run(["validate", "--corpus", str(CORPUS), "--json", str(b), "--jobs", "3"], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_timings_only_on_request(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "compliant_throw")
    _, out = run(["validate", src, "--json", "-"], capsys)
    assert json.loads(out.out)["contracts"][0]["timings"] is None
    _, out = run(["validate", src, "--json", "-", "--timings"], capsys)
    assert "total_s" in json.loads(out.out)["contracts"][0]["timings"]


def test_dump_paths(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "return_false_transfer")
    dump = tmp_path / "paths.jsonl"
    run(["scan", src, "--dump-paths", str(dump)], capsys)
    rows = [json.loads(line) for line in dump.read_text().splitlines()]
    assert rows and {r["function"] for r in rows} >= {"transfer"}
    assert all(r["id"] == "return_false_transfer" and "terminator" in r for r in rows)


def test_budget_flags_reach_the_explorer(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "inlined_safemath")
    _, out = run(["scan", src, "--max-paths", "1", "--json", "-"], capsys)
    (entry,) = json.loads(out.out)["contracts"]
    # a one-path budget cannot finish the analysis, so the contract stays flagged
    assert entry["final"] == "flagged"


@pytest.mark.parametrize("name", ["compliant_throw", "return_false_transfer", "honest_control"])
def test_asm_round_trip(tmp_path, capsys, name):
    src = ROOT / "corpus" / f"{name}.asm"
    bundle = tmp_path / "bundle.jsonl"
    assert run(["asm", str(src), "--out", str(tmp_path), "--bundle", str(bundle)], capsys)[0] == EXIT_OK
    fx = by_name(name)
    assert bytes.fromhex((tmp_path / f"{name}.bin").read_text()) == fx.payload
    assert bytes.fromhex((tmp_path / f"{name}.bin-runtime").read_text()) == fx.runtime
    assert corpus.load(bundle) == [corpus.from_fixture(fx)]


def test_committed_corpus_regenerates(tmp_path, capsys):
    sources = sorted((ROOT / "corpus").glob("*.asm"))
    assert len(sources) == 13
    regenerated = {e.id: e for e in map(asm_entry, sources)}
    committed = corpus.load(CORPUS)
    assert {e.id: e for e in committed} == regenerated


def test_asm_error_exits_one(tmp_path, capsys):
    (tmp_path / "bad.asm").write_text("STOP\n.section runtime\nPUSH1 0x01\nFROB\n")
    code, out = run(["asm", str(tmp_path / "bad.asm"), "--out", str(tmp_path)], capsys)
    assert code == EXIT_ERROR and "line 4" in out.err


def test_report_command_re_reads(tmp_path, capsys):
    src = write_entries(tmp_path / "c.jsonl", "return_false_transfer", "compliant_throw")
    rep = tmp_path / "r.json"
    run(["validate", src, "--json", str(rep)], capsys)
    code, out = run(["report", str(rep)], capsys)
    assert code == EXIT_CONFIRMED and "confirmed=1" in out.out
    rep.write_text(rep.read_text().replace('"total": 2', '"total": 3'))
    assert run(["report", str(rep)], capsys)[0] == EXIT_ERROR


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fakedeposit", "--version"],
                          capture_output=True, text=True, check=True)
    assert proc.stdout.strip()
