import pytest

from fakedeposit.bytecode import ERC20, assemble
from fakedeposit.detector import (
    MANDATORY, DetectError, Verdict, check_interface, detect, locate_key_storage,
    verify_required_throw,
)
from fakedeposit.fixtures import all_fixtures, by_name, dispatcher
from fakedeposit.symexec import explore
from fakedeposit.symexec.terms import StorageRead, sha3_depth, walk

# ground truth per label, written down before looking at detector output
EXPECTED_FLAGS = {
    "compliant_throw": (False, False),
    "inlined_safemath": (False, False),
    "return_false_transfer": (False, True),
    "return_false_transfer_from": (False, True),
    "stringent_inverted": (False, True),
    "missing_transfer_from": (True, False),
    "noop_transfer_from": (True, False),
    "external_safemath": (False, True),
    "stringent_throw": (False, True),
    "transfer_via_transfer_from": (False, True),
    "transfer_enabled_gate": (False, True),
    "fixed_founder": (False, True),
    # same return-false runtime as the Type-II fixture; only the harness differs
    "honest_control": (False, True),
}


@pytest.fixture(scope="module")
def findings():
    return {fx.name: (fx, detect(fx.runtime, id=fx.name)) for fx in all_fixtures()}


def test_interface_reference_fixture():
    rep = check_interface(by_name("compliant_throw").runtime)
    assert set(rep.present) == set(MANDATORY) and all(rep.present.values())
    assert not rep.extraction_heuristic


def test_interface_missing_transfer_from():
    rep = check_interface(by_name("missing_transfer_from").runtime)
    assert rep.present == {name: name != "transferFrom" for name in MANDATORY}


def test_interface_empty_runtime():
    rep = check_interface(b"")
    assert not any(rep.present.values())


def test_interface_selectors_are_hashed():
    rep = check_interface(b"").to_json()
    assert rep["selectors"]["transfer"] == "0xa9059cbb"


def test_return_false_keys_read_then_written():
    paths = explore(by_name("return_false_transfer").runtime, ERC20["transfer"])
    km = locate_key_storage(paths, "transfer")
    assert len(km.balance_keys) == 2 and not km.allowance_keys
    caller_key = next(k for k in km.balance_keys if "caller" in repr(k))
    writes = {w.offset for p in paths for w in p.storage_writes if w.key == caller_key}
    assert writes
    for ev in km.evidence:
        assert ev.read_offset < ev.write_offset


def test_log_only_transfer_has_no_keys():
    body = ("fn: JUMPDEST\nPUSH1 0x00\nPUSH1 0x00\nLOG0\nPUSH1 0x01\nPUSH1 0x00\nMSTORE\n"
            "PUSH1 0x20\nPUSH1 0x00\nRETURN")
    rt = assemble(dispatcher([("transfer(address,uint256)", "fn")]) + "\n" + body)
    km = locate_key_storage(explore(rt, ERC20["transfer"]), "transfer")
    assert km.empty
    verdict, unprotected, nodes = verify_required_throw(explore(rt, ERC20["transfer"]), km)
    assert verdict is Verdict.Skipped and not unprotected and not nodes


def test_reference_transfer_from_has_both_key_kinds():
    km = locate_key_storage(explore(by_name("compliant_throw").runtime, ERC20["transferFrom"]),
                            "transferFrom")
    assert km.balance_keys and km.allowance_keys
    assert all(sha3_depth(k) == 2 for k in km.allowance_keys)
    assert all(sha3_depth(k) == 1 for k in km.balance_keys)


def test_return_false_is_vulnerable():
    paths = explore(by_name("return_false_transfer").runtime, ERC20["transfer"])
    verdict, unprotected, nodes = verify_required_throw(paths, locate_key_storage(paths, "transfer"))
    assert verdict is Verdict.Vulnerable and unprotected
    assert nodes and not any(n.guarded for n in nodes)


def test_inlined_safemath_is_compliant():
    paths = explore(by_name("inlined_safemath").runtime, ERC20["transfer"])
    verdict, unprotected, nodes = verify_required_throw(paths, locate_key_storage(paths, "transfer"))
    assert verdict is Verdict.Compliant and not unprotected
    assert nodes and all(n.guarded for n in nodes)


def test_stringent_fixture_names_the_open_key():
    paths = explore(by_name("stringent_inverted").runtime, ERC20["transfer"])
    verdict, unprotected, nodes = verify_required_throw(paths, locate_key_storage(paths, "transfer"))
    assert verdict is Verdict.Vulnerable
    guarded = {repr(n.guards_key) for n in nodes if n.guarded}
    open_ = {k for u in unprotected for k in u.keys}
    assert open_ and guarded and not (open_ & guarded)
    assert all("caller" in k for k in open_)


def test_protected_node_compares_a_key_term():
    paths = explore(by_name("inlined_safemath").runtime, ERC20["transfer"])
    _, _, nodes = verify_required_throw(paths, locate_key_storage(paths, "transfer"))
    for n in nodes:
        assert any(t == n.guards_key or (isinstance(t, StorageRead) and t.key == n.guards_key)
                   for t in walk(n.compared_term))


@pytest.mark.parametrize("name", sorted(EXPECTED_FLAGS))
def test_candidate_flags(findings, name):
    _, f = findings[name]
    assert (f.type1_candidate, f.type2_candidate) == EXPECTED_FLAGS[name]


def test_invariants_on_every_fixture(findings):
    for fx, f in findings.values():
        if f.type2_candidate:
            assert f.interface.present["transfer"] or f.interface.present["transferFrom"]
        if f.type1_candidate:
            absent = not (f.interface.present["transfer"] and f.interface.present["transferFrom"])
            noop = any(fa.key_map is not None and not fa.key_map.balance_keys
                       for fa in f.functions.values())
            assert absent or noop
        # no vulnerable label is ever silently compliant
        if fx.label.startswith(("type2", "fp-", "fn-")):
            assert f.flagged, fx.name


def test_vulnerable_evidence_replays_to_a_balance_write(findings):
    for fx, f in findings.values():
        for u in f.unprotected_paths:
            fa = f.functions[u.function]
            path = next(p for p in fa.paths if p.id == u.path)
            assert path.trace[-1].name in ("STOP", "RETURN")
            assert any(w.key in fa.key_map.balance_keys for w in path.storage_writes)


def test_false_negative_fixtures_are_not_compliant(findings):
    for name in ("transfer_enabled_gate", "fixed_founder"):
        _, f = findings[name]
        assert f.type2_candidate
        assert Verdict.Compliant is not f.functions["transfer"].verdict


def test_detect_is_deterministic(findings):
    fx, f = findings["stringent_throw"]
    assert detect(fx.runtime, id=fx.name).to_json() == f.to_json()


def test_detect_rejects_empty_and_non_bytes():
    with pytest.raises(DetectError, match="empty bytecode"):
        detect(b"")
    with pytest.raises(DetectError):
        detect("0x6000")


def test_budget_hit_is_flagged_conservatively():
    loop = "fn: JUMPDEST\nloop: JUMPDEST\nCALLER\n@loop\nJUMPI\nSTOP"
    entries = [("transfer(address,uint256)", "fn"), ("transferFrom(address,address,uint256)", "fn")]
    rt = assemble(dispatcher(entries) + "\n" + loop)
    f = detect(rt)
    assert f.functions["transfer"].verdict is Verdict.Indeterminate
    assert f.type2_candidate and any("conservatively" in n for n in f.notes)
