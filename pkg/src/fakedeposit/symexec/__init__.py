"""Solver-free symbolic execution of runtime bytecode."""
from .engine import (
    Branch, Decision, ExploreConfig, ExploreError, Path, Step, StorageAccess, SymState, Terminator,
    eval_branch, explore,
)
from .terms import Concrete, Input, Op, Sha3, StorageRead, Term, evaluate, op, sha3, sha3_term

__all__ = [
    "Branch", "Decision", "ExploreConfig", "ExploreError", "Path", "Step", "StorageAccess",
    "SymState", "Terminator", "eval_branch", "explore", "Concrete", "Input", "Op", "Sha3",
    "StorageRead", "Term", "evaluate", "op", "sha3", "sha3_term",
]
