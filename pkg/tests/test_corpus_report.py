import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fakedeposit.corpus import (
    LABELS, CorpusEntry, CorpusError, dumps, from_file, from_fixture, load, loads, save,
)
from fakedeposit.fixtures import all_fixtures, by_name
from fakedeposit.report import ContractReport, Report, ReportError, parse, summary

entries = st.builds(
    CorpusEntry,
    id=st.text("abcxyz_-0123456789", min_size=1, max_size=12),
    creation_payload=st.binary(max_size=40),
    runtime=st.one_of(st.none(), st.binary(max_size=40)),
    label=st.one_of(st.none(), st.sampled_from(LABELS)),
    harness=st.dictionaries(st.sampled_from(["seed_amount", "attack_amount"]), st.integers(0, 500)),
)


@given(st.lists(entries, max_size=5))
@settings(max_examples=80)
def test_jsonl_round_trip(items):
    assert loads(dumps(items)) == items


def test_hex_is_lowercase_and_prefixed():
    obj = CorpusEntry("x", b"\xAB\xCD").to_json()
    assert obj == {"id": "x", "creation_payload": "0xabcd"}


def test_accepts_single_object_and_array():
    a, b = (from_fixture(fx) for fx in all_fixtures()[:2])
    assert loads(json.dumps(a.to_json())) == [a]
    assert loads(json.dumps([a.to_json(), b.to_json()])) == [a, b]
    upper = {"id": "u", "runtime": "0XAB"}
    assert loads(json.dumps(upper))[0].runtime == b"\xab"


@pytest.mark.parametrize("text", [
    '{"creation_payload": "0x00"}',
    '{"id": "a"}',
    '{"id": "a", "runtime": "0x00", "label": "weird"}',
    '{"id": "a", "runtime": "0xzz"}',
    '{"id": "a", "runtime": "0x00"}\nnot json',
])
def test_bad_entries(text):
    with pytest.raises(CorpusError):
        loads(text)


def test_directory_load(tmp_path):
    fxs = [from_fixture(fx) for fx in all_fixtures()[:3]]
    save(tmp_path / "b.jsonl", fxs[1:])
    (tmp_path / "a.json").write_text(json.dumps(fxs[0].to_json()))
    (tmp_path / "ignored.txt").write_text("junk")
    assert load(tmp_path) == fxs


def test_from_file_kinds(tmp_path):
    fx = by_name("compliant_throw")
    (tmp_path / "tok.bin").write_text("0x" + fx.payload.hex() + "\n")
    (tmp_path / "tok.bin-runtime").write_text(fx.runtime.hex())
    (tmp_path / "empty.bin").write_text("")
    assert from_file(tmp_path / "tok.bin") == CorpusEntry("tok", creation_payload=fx.payload)
    assert from_file(tmp_path / "tok.bin-runtime") == CorpusEntry("tok", runtime=fx.runtime)
    assert from_file(tmp_path / "empty.bin").creation_payload == b""


def test_committed_corpus_matches_fixtures():
    committed = load(Path(__file__).parent.parent / "corpus" / "corpus.jsonl")
    assert committed == [from_fixture(fx) for fx in all_fixtures()]


# -- report ------------------------------------------------------------------


def sample_report():
    return Report("validate", [
        ContractReport("a", "confirmed", label="type2",
                       finding={"type1_candidate": False, "type2_candidate": True}),
        ContractReport("b", "not-flagged", finding={"type1_candidate": False, "type2_candidate": False}),
        ContractReport("c", "error", error="empty bytecode"),
    ])


def test_report_round_trip():
    rep = sample_report()
    again = parse(rep.serialize())
    assert again == rep and again.serialize() == rep.serialize()


def test_aggregate_counts():
    agg = sample_report().aggregate
    assert agg == {"total": 3, "static_flagged": 1,
                   "verdicts": {"confirmed": 1, "error": 1, "not-flagged": 1}}
    assert sample_report().confirmed == 1


def test_tampered_aggregate_is_rejected():
    obj = sample_report().to_json()
    obj["aggregate"]["total"] = 4
    with pytest.raises(ReportError):
        parse(json.dumps(obj))


@pytest.mark.parametrize("text", ["nope", "[]", '{"schema": 2, "command": "scan"}',
                                  '{"schema": 1, "command": "scan", "contracts": [{"id": "x"}]}'])
def test_bad_reports(text):
    with pytest.raises(ReportError):
        parse(text)


def test_summary_lists_every_contract():
    text = summary(sample_report())
    assert text.splitlines()[-1].startswith("total=3 static_flagged=1")
    assert "empty bytecode" in text and len(text.splitlines()) == 5
