"""Reference DEX hosted as a native contract.

`depositToken(token, amount)` pulls `amount` via the token's transferFrom
and credits the caller in a private `tokens` table. How the nested call's
outcome is decoded is the policy under test.
"""
from __future__ import annotations

import enum

from .abi import decode_word, encode_call, word
from .bytecode.keccak import keccak256
from .bytecode.selectors import Selector
from .evm.arith import MASK
from .evm.interpreter import NativeContext, NativeRevert
from .evm.state import to_address

DEPOSIT = Selector.of("depositToken(address,uint256)")
TOKENS = Selector.of("tokens(address,address)")
DEPOSIT_TOPIC = int.from_bytes(keccak256(b"Deposit(address,address,uint256,uint256)"), "big")


class DecodePolicy(enum.Enum):
    # empty returndata counts as success (the missing-return-value flaw)
    Flawed = "flawed"
    # success needs a returned nonzero word
    Strict = "strict"


def accepts(policy: DecodePolicy, status: int, returndata: bytes) -> bool:
    if status != 1:
        return False
    first = decode_word(returndata)
    if policy is DecodePolicy.Flawed:
        return not returndata or bool(first)
    return bool(first)


class NativeDex:
    def __init__(self, policy: DecodePolicy = DecodePolicy.Flawed):
        self.policy = policy

    @staticmethod
    def credited(table: dict, token: bytes, user: bytes) -> int:
        return table.get("tokens", {}).get((token, user), 0)

    def __call__(self, ctx: NativeContext) -> bytes:
        data = ctx.calldata
        sel = data[:4]
        if sel == DEPOSIT.value and len(data) >= 68:
            return self._deposit(ctx, to_address(int.from_bytes(data[4:36], "big")),
                                 int.from_bytes(data[36:68], "big"))
        if sel == TOKENS.value and len(data) >= 68:
            token = to_address(int.from_bytes(data[4:36], "big"))
            user = to_address(int.from_bytes(data[36:68], "big"))
            return word(self.credited(ctx.table, token, user))
        raise NativeRevert(reason="unknown DEX function")

    def _deposit(self, ctx: NativeContext, token: bytes, amount: int) -> bytes:
        if ctx.value > 0 or token == bytes(20):
            raise NativeRevert(reason="bad deposit arguments")
        status, ret = ctx.call(token, encode_call(
            "transferFrom(address,address,uint256)", ctx.caller, ctx.address, amount))
        if not accepts(self.policy, status, ret):
            raise NativeRevert(reason="token transferFrom rejected")
        balances = ctx.table.setdefault("tokens", {})
        key = (token, ctx.caller)
        credited = balances.get(key, 0) + amount
        if credited > MASK:
            raise NativeRevert(reason="credit overflow")
        balances[key] = credited
        ctx.log([DEPOSIT_TOPIC], word(token) + word(ctx.caller) + word(amount) + word(credited))
        return b""
