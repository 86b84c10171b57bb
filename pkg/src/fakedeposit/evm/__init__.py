from .arith import MASK, WORD
from .interpreter import (
    DEFAULT_STEP_BUDGET, NATIVE_MARKER, BlockEnv, Log, NativeContext, NativeRevert, Receipt, Tx,
    call_view, deploy, derive_address, derive_address2, execute_transaction, register_native,
    transcript_entry,
)
from .state import Account, EvmError, WorldState, load_genesis, to_address

__all__ = [
    "MASK", "WORD", "DEFAULT_STEP_BUDGET", "NATIVE_MARKER", "BlockEnv", "Log", "NativeContext",
    "NativeRevert", "Receipt", "Tx", "call_view", "deploy", "derive_address", "derive_address2",
    "execute_transaction", "register_native", "transcript_entry", "Account", "EvmError",
    "WorldState", "load_genesis", "to_address",
]
