import pytest
from Crypto.Hash import keccak as pykeccak
from hypothesis import given, settings
from hypothesis import strategies as st

from fakedeposit.bytecode import (
    ERC20, AsmError, SectionError, Selector, assemble, assemble_fixture, disassemble,
    dispatch_selectors, extract_selectors, find_metadata, format_asm, keccak256, parse_hex,
    split_sections, strip_metadata,
)
from fakedeposit.bytecode.opcodes import BY_NAME
from fakedeposit.evm import Tx, execute_transaction
from fakedeposit.fixtures import all_fixtures, by_name
from fakedeposit.validator import setup

EMPTY = "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
ABC = "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"


def oracle(data: bytes) -> bytes:
    return pykeccak.new(digest_bits=256, data=data).digest()


# -- keccak ------------------------------------------------------------------


def test_keccak_published_vectors():
    assert keccak256(b"").hex() == EMPTY
    assert keccak256(b"abc").hex() == ABC


def test_keccak_megabyte_of_zeros_matches_reference():
    data = bytes(1 << 20)
    assert keccak256(data) == oracle(data)


def test_transfer_selector():
    assert keccak256(b"transfer(address,uint256)")[:4].hex() == "a9059cbb"
    assert ERC20["transfer"].hex == "a9059cbb"
    assert ERC20["transferFrom"].hex == "23b872dd"


@pytest.mark.parametrize("n", [0, 1, 135, 136, 137, 271, 272, 1000])
def test_keccak_rate_boundaries(n):
    data = bytes(range(256)) * 4
    assert keccak256(data[:n]) == oracle(data[:n])


@given(st.binary(max_size=600))
@settings(max_examples=60, deadline=None)
def test_keccak_matches_reference(data):
    assert keccak256(data) == oracle(data)
    assert keccak256(data) == keccak256(data)


def test_selector_invariant():
    s = Selector.of("balanceOf(address)")
    assert s.value == keccak256(b"balanceOf(address)")[:4]
    assert Selector.from_hex("0x70a08231") == s


# -- disassembler ------------------------------------------------------------


def names(code):
    return [str(i) for i in disassemble(code)]


def test_disassemble_examples():
    assert names(bytes.fromhex("6001600201")) == ["PUSH1 0x01", "PUSH1 0x02", "ADD"]
    stream = disassemble(b"\x55")
    assert [(i.offset, i.name) for i in stream] == [(0, "SSTORE")]
    (trunc,) = disassemble(b"\x60")
    assert trunc.name == "PUSH1" and trunc.truncated and trunc.immediate == b"\x00"


def test_unknown_byte_takes_one_slot():
    stream = disassemble(bytes([0x0C, 0x5B, 0xEF]))
    assert [i.offset for i in stream] == [0, 1, 2]
    assert stream.instructions[0].is_invalid and stream.instructions[2].is_invalid
    assert stream.jumpdests == {1}


def test_jumpdest_inside_push_data_is_not_a_target():
    stream = disassemble(bytes.fromhex("605b5b"))
    assert stream.jumpdests == {2}


@given(st.binary(max_size=400))
@settings(max_examples=200)
def test_disassemble_is_total(code):
    stream = disassemble(code)
    offsets = [i.offset for i in stream]
    assert offsets == sorted(set(offsets))
    pos = 0
    for ins in stream:
        assert ins.offset == pos
        width = ins.op.push_width
        assert (ins.immediate is None) == (width == 0)
        if ins.immediate is not None:
            assert len(ins.immediate) == width
        pos = ins.next_offset
    assert pos >= len(code)
    assert stream.jumpdests <= set(offsets)
    assert disassemble(code) == stream


def test_parse_hex_tolerates_prefix_and_whitespace():
    assert parse_hex("0x60 01\n6002") == bytes.fromhex("60016002")
    assert parse_hex("") == b""


# -- assembler ---------------------------------------------------------------


def test_assemble_examples():
    assert assemble("PUSH1 0x01\nPUSH1 0x02\nADD") == bytes.fromhex("6001600201")
    code = assemble("@end\nJUMP\nINVALID\nend: JUMPDEST\nSTOP")
    assert code == bytes.fromhex("61000556fe5b00")
    assert disassemble(code).jumpdests == {5}


@pytest.mark.parametrize("src, line", [
    ("ADD\nFROB", 2),
    ("PUSH1 0x100", 1),
    ("@nowhere\nJUMP", 1),
    ("PUSH1 12", 1),
])
def test_assemble_errors_carry_line(src, line):
    with pytest.raises(AsmError) as err:
        assemble(src)
    assert err.value.line == line


_MNEMONICS = sorted(n for n in BY_NAME if not n.startswith("PUSH") and not n.startswith("INVALID"))


@st.composite
def programs(draw):
    lines = []
    for _ in range(draw(st.integers(0, 40))):
        if draw(st.booleans()):
            width = draw(st.integers(1, 32))
            value = draw(st.integers(0, (1 << (8 * width)) - 1))
            lines.append(f"PUSH{width} 0x{value:0{2 * width}x}")
        else:
            lines.append(draw(st.sampled_from(_MNEMONICS)))
    return lines


@given(programs())
@settings(max_examples=150)
def test_assembler_round_trip(lines):
    code = assemble("\n".join(lines))
    assert [str(i) for i in disassemble(code)] == lines
    assert assemble(format_asm(code)) == code


def test_fixture_sections_expose_layout():
    img = assemble_fixture("PUSH1 @runtime.size\nSTOP\n.section runtime\nADD\nSTOP\n")
    assert img.runtime == bytes.fromhex("0100")
    assert img.section("runtime") == img.runtime
    assert img.payload == bytes.fromhex("600200") + img.runtime


# -- sections ----------------------------------------------------------------


def _deploy(payload):
    h = setup()
    r = h.send(h.owner, None, payload)
    return r, (h.world.get(r.created).code if r.created else b"")


def test_split_recovers_constructor_args():
    fx = by_name("compliant_throw")
    receipt, runtime = _deploy(fx.payload)
    assert runtime == fx.runtime
    sec = split_sections(fx.payload, runtime, receipt.code_copies)
    assert len(sec.constructor_args) == 32
    assert sec.creation + sec.constructor_args == fx.payload
    assert sec.init_code == fx.image().section("init")


def test_split_empty_runtime_is_flagged():
    payload = assemble("PUSH1 0x00\nDUP1\nRETURN")
    receipt, runtime = _deploy(payload)
    assert receipt.ok and runtime == b""
    sec = split_sections(payload, runtime)
    assert sec.runtime == b"" and "empty-runtime" in sec.flags


def test_split_without_constructor():
    runtime = assemble("PUSH1 0x00\nDUP1\nRETURN")
    sec = split_sections(runtime, runtime)
    assert "no-constructor" in sec.flags and sec.init_code == b""


def test_split_rejects_foreign_runtime():
    with pytest.raises(SectionError):
        split_sections(b"\x60\x00", b"\x01\x02\x03")


def test_metadata_trailer_is_excluded_from_scanning():
    body = assemble("PUSH4 0xa9059cbb\nPOP\nSTOP")
    cbor = bytes([0xA1, 0x65]) + b"bzzr0" + bytes([0x58, 0x20]) + bytes(32)
    runtime = body + cbor + len(cbor).to_bytes(2, "big")
    assert find_metadata(runtime) == cbor + len(cbor).to_bytes(2, "big")
    assert strip_metadata(runtime) == body
    assert find_metadata(body) is None


# -- selectors ---------------------------------------------------------------


def test_reference_fixture_selectors():
    found = extract_selectors(by_name("compliant_throw").runtime)
    assert {s.hex for s in found} == {s.hex for s in ERC20.values()}


def test_no_push4_means_no_selectors():
    assert extract_selectors(assemble("PUSH1 0x00\nDUP1\nRETURN")) == frozenset()


def test_fallback_only_fixture_lacks_transfer_from():
    fx = by_name("missing_transfer_from")
    found = extract_selectors(fx.runtime)
    assert ERC20["transferFrom"] not in found and ERC20["transfer"] in found


def test_undispatched_push4_uses_heuristic():
    found, heuristic = dispatch_selectors(assemble("PUSH4 0x12345678\nPOP\nSTOP"))
    assert heuristic and {s.hex for s in found} == {"12345678"}


def _pcs(world, token, data) -> list[int]:
    pcs = []
    execute_transaction(world, Tx(CALLER, token, data),
                        tracer=lambda depth, pc, op: pcs.append(pc) if depth == 0 else None)
    return pcs


def _dispatched(world, token, selector: Selector) -> bool:
    """An undispatched selector fails every comparison, exactly like an unknown one."""
    args = bytes(96)
    return _pcs(world, token, selector.value + args) != _pcs(world, token, b"\xff" * 4 + args)


CALLER = bytes(19) + b"\x07"


@pytest.mark.parametrize("fx", all_fixtures(), ids=lambda f: f.name)
def test_selector_soundness_against_interpreter(fx):
    h = setup([{"address": "0x" + "00" * 19 + "07", "balance": 1}])
    r = h.send(h.owner, None, fx.payload)
    found = extract_selectors(fx.runtime)
    for name, sel in ERC20.items():
        assert (sel in found) == _dispatched(h.world, r.created, sel), name
