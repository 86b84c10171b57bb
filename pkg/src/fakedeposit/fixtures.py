"""Assembler sources for the labeled token corpus.

Every token shares one storage layout: slot 0 holds totalSupply, slot 1
the balance mapping, slot 2 the nested allowance mapping, slots 3 and up
anything fixture-specific. Function bodies keep their locals in memory:
0x80 = from, 0xa0 = value, 0xc0 = to, 0xe0 = return buffer.

Labels always share a line with their JUMPDEST so that padding can be
inserted between any two lines without moving a jump target.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .bytecode.asm import FixtureImage, assemble_fixture
from .bytecode.keccak import keccak256
from .bytecode.selectors import Selector

SUPPLY = 10**27
FOUNDER = 0xCB7E0000000000000000000000000000000F0F0D
MAX_UINT = (1 << 256) - 1
MASK160 = "0x" + "ff" * 20
TRANSFER_TOPIC = "0x" + keccak256(b"Transfer(address,address,uint256)").hex()
APPROVAL_TOPIC = "0x" + keccak256(b"Approval(address,address,uint256)").hex()

LOAD_FROM = "PUSH1 0x80\nMLOAD"
LOAD_VALUE = "PUSH1 0xa0\nMLOAD"
LOAD_TO = "PUSH1 0xc0\nMLOAD"


def _sel(signature: str) -> str:
    return "0x" + Selector.of(signature).hex


def _join(*parts: str) -> str:
    return "\n".join(p.strip("\n") for p in parts if p)


def word(value: int) -> str:
    return f"PUSH32 0x{value:064x}"


# -- building blocks -----------------------------------------------------------


def map_key(slot: int) -> str:
    """[.., addr] -> [.., keccak(addr ++ slot)]"""
    return _join(f"PUSH20 {MASK160}", "AND", "PUSH1 0x00", "MSTORE",
                 f"PUSH1 0x{slot:02x}", "PUSH1 0x20", "MSTORE", "PUSH1 0x40", "PUSH1 0x00", "SHA3")


def nested_key(slot: int) -> str:
    """[.., inner, outer] -> [.., keccak(inner ++ keccak(outer ++ slot))]"""
    return _join(map_key(slot), "SWAP1", f"PUSH20 {MASK160}", "AND", "PUSH1 0x00", "MSTORE",
                 "PUSH1 0x20", "MSTORE", "PUSH1 0x40", "PUSH1 0x00", "SHA3")


def balance_of(load_addr: str) -> str:
    return _join(load_addr, map_key(1), "SLOAD")


ALLOWANCE_KEY = _join("CALLER", LOAD_FROM, nested_key(2))


def return_word(load: str) -> str:
    return _join(load, "PUSH1 0xe0", "MSTORE", "PUSH1 0x20", "PUSH1 0xe0", "RETURN")


RETURN_TRUE = return_word("PUSH1 0x01")
REVERT = _join("PUSH1 0x00", "DUP1", "REVERT")


def fail_block(mode: str) -> str:
    return "INVALID" if mode == "invalid" else REVERT


def check(ok: str, mode: str | None, p: str, tag: str) -> str:
    """Guard on an 'ok' condition already computed by the `ok` snippet.

    mode "false" jumps to the function's return-false exit on failure;
    "revert" and "invalid" abort the call; None omits the check.
    """
    if mode is None:
        return ""
    if mode == "false":
        return _join(ok, "ISZERO", f"@{p}_false", "JUMPI")
    return _join(ok, f"@{p}_{tag}_ok", "JUMPI", fail_block(mode), f"{p}_{tag}_ok: JUMPDEST")


SENDER_OK = _join(LOAD_VALUE, balance_of(LOAD_FROM), "LT", "ISZERO")
RECIPIENT_OK = _join(balance_of(LOAD_TO), LOAD_VALUE, "DUP2", "ADD", "LT", "ISZERO")
ALLOWANCE_OK = _join(LOAD_VALUE, ALLOWANCE_KEY, "SLOAD", "LT", "ISZERO")

DEBIT = _join(LOAD_VALUE, balance_of(LOAD_FROM), "SUB", LOAD_FROM, map_key(1), "SSTORE")
CREDIT = _join(LOAD_VALUE, balance_of(LOAD_TO), "ADD", LOAD_TO, map_key(1), "SSTORE")
DEBIT_ALLOWANCE = _join(LOAD_VALUE, ALLOWANCE_KEY, "SLOAD", "SUB", ALLOWANCE_KEY, "SSTORE")
EMIT_TRANSFER = _join(LOAD_VALUE, "PUSH1 0xe0", "MSTORE", LOAD_TO, LOAD_FROM,
                      f"PUSH32 {TRANSFER_TOPIC}", "PUSH1 0x20", "PUSH1 0xe0", "LOG3")


def transfer_args(p: str) -> str:
    return _join(
        f"{p}: JUMPDEST",
        "CALLER", f"PUSH20 {MASK160}", "AND", "PUSH1 0x80", "MSTORE",
        "PUSH1 0x04", "CALLDATALOAD", f"PUSH20 {MASK160}", "AND", "PUSH1 0xc0", "MSTORE",
        "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0xa0", "MSTORE",
    )


def transfer_from_args(p: str) -> str:
    return _join(
        f"{p}: JUMPDEST",
        "PUSH1 0x04", "CALLDATALOAD", f"PUSH20 {MASK160}", "AND", "PUSH1 0x80", "MSTORE",
        "PUSH1 0x24", "CALLDATALOAD", f"PUSH20 {MASK160}", "AND", "PUSH1 0xc0", "MSTORE",
        "PUSH1 0x44", "CALLDATALOAD", "PUSH1 0xa0", "MSTORE",
    )


def false_exit(p: str) -> str:
    return _join(f"{p}_false: JUMPDEST", return_word("PUSH1 0x00"))


def inline_move(p: str, sender: str | None, recipient: str | None,
                allowance: str | None = None) -> str:
    """Checked balance move; `allowance` is a check mode or "sentinel"."""
    parts = [check(SENDER_OK, sender, p, "bal")]
    if allowance == "sentinel":
        # skip the allowance when spending one's own tokens or when it is unlimited
        parts += [
            "CALLER", f"PUSH20 {MASK160}", "AND", LOAD_FROM, "EQ", f"@{p}_skip", "JUMPI",
            ALLOWANCE_KEY, "SLOAD", word(MAX_UINT), "EQ", "ISZERO", "ISZERO", f"@{p}_skip", "JUMPI",
            check(ALLOWANCE_OK, "revert", p, "allow"), DEBIT_ALLOWANCE,
            f"{p}_skip: JUMPDEST",
        ]
    elif allowance is not None:
        parts += [check(ALLOWANCE_OK, allowance, p, "allow"), DEBIT_ALLOWANCE]
    parts += [check(RECIPIENT_OK, recipient, p, "ovf"), DEBIT, CREDIT, EMIT_TRANSFER, RETURN_TRUE]
    if "false" in (sender, recipient, allowance):
        parts.append(false_exit(p))
    return _join(*parts)


SAFE_MATH_SUBROUTINES = _join(
    "# safe_sub: [ret, a, b] -> [a - b], INVALID when b > a",
    "safe_sub: JUMPDEST", "DUP2", "DUP2", "GT", "ISZERO", "@safe_sub_ok", "JUMPI", "INVALID",
    "safe_sub_ok: JUMPDEST", "SWAP1", "SUB", "SWAP1", "JUMP",
    "# safe_add: [ret, a, b] -> [a + b], INVALID on overflow",
    "safe_add: JUMPDEST", "DUP2", "ADD", "DUP1", "DUP3", "GT", "ISZERO", "@safe_add_ok", "JUMPI", "INVALID",
    "safe_add_ok: JUMPDEST", "SWAP1", "POP", "SWAP1", "JUMP",
)


def subroutine_move(p: str, with_allowance: bool) -> str:
    parts = [
        f"@{p}_r1", balance_of(LOAD_FROM), LOAD_VALUE, "@safe_sub", "JUMP",
        f"{p}_r1: JUMPDEST", LOAD_FROM, map_key(1), "SSTORE",
    ]
    if with_allowance:
        parts += [
            f"@{p}_r2", ALLOWANCE_KEY, "SLOAD", LOAD_VALUE, "@safe_sub", "JUMP",
            f"{p}_r2: JUMPDEST", ALLOWANCE_KEY, "SSTORE",
        ]
    parts += [
        f"@{p}_r3", balance_of(LOAD_TO), LOAD_VALUE, "@safe_add", "JUMP",
        f"{p}_r3: JUMPDEST", LOAD_TO, map_key(1), "SSTORE",
        EMIT_TRANSFER, RETURN_TRUE,
    ]
    return _join(*parts)


def helper_call(selector: str, load_a: str) -> str:
    """CALL helper.<selector>(a, value); revert if it fails, leave result on stack."""
    n = selector[2:10]
    return _join(
        word(int(selector, 16) << 224), "PUSH2 0x0100", "MSTORE",
        load_a, "PUSH2 0x0104", "MSTORE",
        LOAD_VALUE, "PUSH2 0x0124", "MSTORE",
        "PUSH1 0x20", "PUSH1 0xe0", "PUSH1 0x44", "PUSH2 0x0100", "PUSH1 0x00",
        "PUSH1 0x03", "SLOAD", "GAS", "CALL",
        f"@call_ok_{n}", "JUMPI", REVERT, f"call_ok_{n}: JUMPDEST",
        "PUSH1 0xe0", "MLOAD",
    )


SAFE_SUB_SIG = "safeSub(uint256,uint256)"
SAFE_ADD_SIG = "safeAdd(uint256,uint256)"


def external_move(p: str) -> str:
    return _join(
        helper_call(_sel(SAFE_SUB_SIG), balance_of(LOAD_FROM)), LOAD_FROM, map_key(1), "SSTORE",
        helper_call(_sel(SAFE_ADD_SIG), balance_of(LOAD_TO)), LOAD_TO, map_key(1), "SSTORE",
        EMIT_TRANSFER, RETURN_TRUE,
    )


HELPER_INIT = _join(
    "@helper_runtime.size", "DUP1", "@helper_init.size", "PUSH1 0x00", "CODECOPY",
    "PUSH1 0x00", "RETURN",
)

HELPER_RUNTIME = _join(
    "PUSH1 0x00", "CALLDATALOAD", "PUSH1 0xe0", "SHR",
    "DUP1", f"PUSH4 {_sel(SAFE_SUB_SIG)}", "EQ", "@sub", "JUMPI",
    "DUP1", f"PUSH4 {_sel(SAFE_ADD_SIG)}", "EQ", "@add", "JUMPI",
    REVERT,
    "sub: JUMPDEST", "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0x04", "CALLDATALOAD",
    "DUP2", "DUP2", "LT", "@fail", "JUMPI", "SUB", "@out", "JUMP",
    "add: JUMPDEST", "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0x04", "CALLDATALOAD",
    "DUP2", "DUP2", "ADD", "SWAP1", "DUP2", "LT", "@fail", "JUMPI", "POP", "SWAP1", "POP",
    "out: JUMPDEST", "PUSH1 0x00", "MSTORE", "PUSH1 0x20", "PUSH1 0x00", "RETURN",
    "fail: JUMPDEST", REVERT,
)

# -- the standard functions ----------------------------------------------------

TOTAL_SUPPLY = _join("fn_total_supply: JUMPDEST", return_word(_join("PUSH1 0x00", "SLOAD")))
BALANCE_OF = _join("fn_balance_of: JUMPDEST",
                   return_word(_join("PUSH1 0x04", "CALLDATALOAD", map_key(1), "SLOAD")))
ALLOWANCE = _join("fn_allowance: JUMPDEST", return_word(_join(
    "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0x04", "CALLDATALOAD", nested_key(2), "SLOAD")))
APPROVE = _join(
    "fn_approve: JUMPDEST",
    "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0x04", "CALLDATALOAD", "CALLER", nested_key(2), "SSTORE",
    "PUSH1 0x24", "CALLDATALOAD", "PUSH1 0xe0", "MSTORE",
    "PUSH1 0x04", "CALLDATALOAD", f"PUSH20 {MASK160}", "AND", "CALLER",
    f"PUSH32 {APPROVAL_TOPIC}", "PUSH1 0x20", "PUSH1 0xe0", "LOG3",
    RETURN_TRUE,
)

STANDARD = {
    "totalSupply()": ("fn_total_supply", TOTAL_SUPPLY),
    "balanceOf(address)": ("fn_balance_of", BALANCE_OF),
    "allowance(address,address)": ("fn_allowance", ALLOWANCE),
    "approve(address,uint256)": ("fn_approve", APPROVE),
}


def dispatcher(entries: list[tuple[str, str]], fallback: str = REVERT) -> str:
    """solc-0.4 style selector switch over (signature, label) pairs."""
    parts = [
        "PUSH1 0x80", "PUSH1 0x40", "MSTORE",
        "PUSH1 0x04", "CALLDATASIZE", "LT", "@fallback", "JUMPI",
        "PUSH29 0x01" + "00" * 28, "PUSH1 0x00", "CALLDATALOAD", "DIV",
        "PUSH4 0xffffffff", "AND",
    ]
    for sig, label in entries:
        parts += ["DUP1", f"PUSH4 {_sel(sig)}", "EQ", f"@{label}", "JUMPI"]
    parts += ["@fallback", "JUMP", "fallback: JUMPDEST", fallback]
    return _join(*parts)


def token_runtime(functions: dict[str, tuple[str, str]], fallback: str = REVERT,
                  extra: str = "", order: list[str] | None = None) -> str:
    """Dispatcher plus bodies; `functions` maps signature to (label, body)."""
    funcs = dict(STANDARD)
    funcs.update(functions)
    sigs = order or list(funcs)
    entries = [(s, funcs[s][0]) for s in sigs]
    bodies = [funcs[s][1] for s in sigs]
    return _join(dispatcher(entries, fallback), *bodies, extra)


# -- constructors --------------------------------------------------------------

COPY_RUNTIME = _join("@runtime.size", "DUP1", "@runtime.offset", "PUSH1 0x00", "CODECOPY",
                     "PUSH1 0x00", "RETURN")


def mint_to(holder: str, supply: str = word(SUPPLY)) -> str:
    return _join(supply, "DUP1", "PUSH1 0x00", "SSTORE", holder, map_key(1), "SSTORE")


SUPPLY_FROM_ARGS = _join("PUSH1 0x20", "PUSH1 0x20", "CODESIZE", "SUB", "PUSH1 0x00", "CODECOPY",
                         "PUSH1 0x00", "MLOAD")


def fixture_source(init: str, runtime: str, extra_sections: dict[str, str] | None = None,
                   comment: str = "") -> str:
    head = "".join(f"# {line}\n" for line in comment.splitlines())
    parts = [head + "# constructor", init, COPY_RUNTIME]
    for name, body in (extra_sections or {}).items():
        parts += [f".section {name}", body]
    parts += [".section runtime", runtime]
    return _join(*parts) + "\n"


# -- the corpus ----------------------------------------------------------------


@dataclass(frozen=True)
class Fixture:
    name: str
    label: str
    source: str
    args: bytes = b""
    harness: dict = field(default_factory=dict)
    description: str = ""

    def image(self) -> FixtureImage:
        return assemble_fixture(self.source)

    @property
    def payload(self) -> bytes:
        return self.image().payload + self.args

    @property
    def runtime(self) -> bytes:
        return self.image().runtime

    def annotated_source(self) -> str:
        """Source with the `# label/args/harness` header the `asm` command reads."""
        head = [f"# label: {self.label}"]
        if self.args:
            head.append(f"# args: 0x{self.args.hex()}")
        if self.harness:
            head.append("# harness: " + ",".join(f"{k}={v}" for k, v in sorted(self.harness.items())))
        return "\n".join(head) + "\n" + self.source


def _tf(body: str) -> tuple[str, str]:
    return ("fn_transfer", body)


def _tff(body: str) -> tuple[str, str]:
    return ("fn_transfer_from", body)


def transfer_fn(body: str) -> str:
    return _join(transfer_args("fn_transfer"), body)


def transfer_from_fn(body: str) -> str:
    return _join(transfer_from_args("fn_transfer_from"), body)


def _standard_fixture(name, label, transfer_body, transfer_from_body, description,
                      init=None, fallback=REVERT, extra="", extra_functions=None,
                      args=b"", harness=None, extra_sections=None) -> Fixture:
    functions = {}
    if transfer_body is not None:
        functions["transfer(address,uint256)"] = _tf(transfer_fn(transfer_body))
    if transfer_from_body is not None:
        functions["transferFrom(address,address,uint256)"] = _tff(transfer_from_fn(transfer_from_body))
    functions.update(extra_functions or {})
    runtime = token_runtime(functions, fallback, extra)
    source = fixture_source(init or mint_to("CALLER"), runtime, extra_sections, description)
    return Fixture(name, label, source, args, dict(harness or {}), description)


def compliant_throw() -> Fixture:
    return _standard_fixture(
        "compliant_throw", "compliant",
        subroutine_move("tr", False), subroutine_move("tf", True),
        "Reference token: safeSub/safeAdd subroutines abort with INVALID.\n"
        "Initial supply is read from a 32-byte constructor argument.",
        init=mint_to("CALLER", SUPPLY_FROM_ARGS), extra=SAFE_MATH_SUBROUTINES,
        args=SUPPLY.to_bytes(32, "big"),
    )


def inlined_safemath() -> Fixture:
    return _standard_fixture(
        "inlined_safemath", "compliant",
        inline_move("tr", "revert", "revert"), inline_move("tf", "revert", "revert", "revert"),
        "Balance and overflow checks inlined, each guarded by REVERT.",
    )


def _return_false_token(name, label, harness=None, description="") -> Fixture:
    return _standard_fixture(
        name, label,
        inline_move("tr", "false", "false"), inline_move("tf", "revert", "revert", "revert"),
        description, harness=harness,
    )


def return_false_transfer() -> Fixture:
    return _return_false_token("return_false_transfer", "type2",
                     description="transfer answers false on insufficient balance instead of aborting.")


def honest_control() -> Fixture:
    return _return_false_token("honest_control", "compliant", harness={"seed_amount": 100},
                     description="Return-false transfer, but the attacker really owns what it deposits.")


def return_false_transfer_from() -> Fixture:
    return _standard_fixture(
        "return_false_transfer_from", "type2",
        inline_move("tr", "false", "false"), inline_move("tf", "false", "false", "false"),
        "Both transfer and transferFrom answer false instead of aborting.",
    )


def stringent_inverted() -> Fixture:
    return _standard_fixture(
        "stringent_inverted", "type2",
        inline_move("tr", "false", "revert"), inline_move("tf", "revert", "revert", "revert"),
        "Recipient overflow aborts, but the sender balance check answers false.",
    )


def missing_transfer_from() -> Fixture:
    return _standard_fixture(
        "missing_transfer_from", "type1",
        inline_move("tr", "revert", "revert"), None,
        "No transferFrom; a permissive fallback accepts any call.",
        fallback="STOP",
    )


NOOP_TRANSFER_FROM = _join(EMIT_TRANSFER, RETURN_TRUE)


def noop_transfer_from() -> Fixture:
    return _standard_fixture(
        "noop_transfer_from", "type1",
        inline_move("tr", "revert", "revert"), NOOP_TRANSFER_FROM,
        "transferFrom logs a Transfer and answers true without moving anything.",
    )


def external_safemath() -> Fixture:
    init = _join(
        mint_to("CALLER"),
        "# deploy the arithmetic helper and remember it in slot 3",
        "@helper_init.size", "@helper_runtime.size", "ADD", "DUP1",
        "@helper_init.offset", "PUSH1 0x00", "CODECOPY",
        "PUSH1 0x00", "PUSH1 0x00", "CREATE", "PUSH1 0x03", "SSTORE",
    )
    return _standard_fixture(
        "external_safemath", "fp-safemath",
        external_move("tr"), inline_move("tf", "revert", "revert", "revert"),
        "Arithmetic lives in a helper contract reached by CALL; the helper reverts on\n"
        "underflow and overflow, which the token propagates.",
        init=init, extra_sections={"helper_init": HELPER_INIT, "helper_runtime": HELPER_RUNTIME},
    )


def stringent_throw() -> Fixture:
    return _standard_fixture(
        "stringent_throw", "fp-stringent",
        inline_move("tr", "revert", "false"), inline_move("tf", "revert", "revert", "revert"),
        "Sender balance check aborts; only the recipient overflow check answers false.",
    )


def transfer_via_transfer_from() -> Fixture:
    body = _join("fn_transfer_from_body: JUMPDEST", inline_move("tf", "revert", None, "sentinel"))
    transfer = _join(transfer_args("fn_transfer"), "@fn_transfer_from_body", "JUMP")
    return _standard_fixture(
        "transfer_via_transfer_from", "fp-nonstd",
        None, None,
        "transfer delegates to transferFrom, which requires a sufficient balance and\n"
        "skips the allowance when it is unlimited.",
        extra_functions={
            "transfer(address,uint256)": ("fn_transfer", transfer),
            "transferFrom(address,address,uint256)": ("fn_transfer_from",
                                                      _join(transfer_from_args("fn_transfer_from"), body)),
        },
    )


GATE = _join("PUSH1 0x03", "SLOAD", "@{p}_open", "JUMPI", REVERT, "{p}_open: JUMPDEST")

ENABLE_TRANSFER = _join(
    "fn_enable: JUMPDEST",
    "PUSH1 0x04", "SLOAD", "CALLER", "EQ", "@fn_enable_ok", "JUMPI", REVERT,
    "fn_enable_ok: JUMPDEST", "PUSH1 0x04", "CALLDATALOAD", "ISZERO", "ISZERO", "PUSH1 0x03", "SSTORE",
    "STOP",
)


def transfer_enabled_gate() -> Fixture:
    return _standard_fixture(
        "transfer_enabled_gate", "fn-init",
        _join(GATE.format(p="tr"), inline_move("tr", "false", "false")),
        _join(GATE.format(p="tf"), inline_move("tf", "revert", "revert", "revert")),
        "Transfers stay disabled until the owner calls enableTransfer(true).",
        init=_join(mint_to("CALLER"), "CALLER", "PUSH1 0x04", "SSTORE"),
        extra_functions={"enableTransfer(bool)": ("fn_enable", ENABLE_TRANSFER)},
    )


def fixed_founder() -> Fixture:
    return _standard_fixture(
        "fixed_founder", "fn-supply",
        inline_move("tr", "false", "false"), inline_move("tf", "revert", "revert", "revert"),
        "The whole supply is minted to a hard-coded founder address.",
        init=_join(mint_to(f"PUSH20 0x{FOUNDER:040x}"), f"PUSH20 0x{FOUNDER:040x}", "PUSH1 0x03", "SSTORE"),
    )


BUILDERS = [
    compliant_throw, inlined_safemath, honest_control, return_false_transfer,
    return_false_transfer_from, stringent_inverted, missing_transfer_from, noop_transfer_from,
    external_safemath, stringent_throw, transfer_via_transfer_from, transfer_enabled_gate,
    fixed_founder,
]


def all_fixtures() -> list[Fixture]:
    return [build() for build in BUILDERS]


def by_name(name: str) -> Fixture:
    for build in BUILDERS:
        if build.__name__ == name:
            return build()
    raise KeyError(name)
