"""Symbolic word terms.

Terms are immutable, hash-consed by structure (equality is structural and
the hash is computed once), and built through :func:`op` so that constant
folding and a few identity rewrites are always applied.
"""
from __future__ import annotations

from typing import Callable, Iterator, Mapping

from ..bytecode.keccak import keccak256
from ..evm import arith


class Term:
    __slots__ = ("_key", "_hash")

    def __init__(self, key: tuple):
        self._key = key
        self._hash = hash(key)

    def __eq__(self, other):
        if self is other:
            return True
        return type(other) is type(self) and other._hash == self._hash and other._key == self._key

    def __hash__(self):
        return self._hash

    @property
    def children(self) -> tuple["Term", ...]:
        return ()

    @property
    def is_concrete(self) -> bool:
        return False


class Concrete(Term):
    __slots__ = ("value",)

    def __init__(self, value: int):
        value &= arith.MASK
        self.value = value
        super().__init__(("c", value))

    @property
    def is_concrete(self) -> bool:
        return True

    def __repr__(self):
        return f"0x{self.value:x}" if self.value > 9 else str(self.value)


class Input(Term):
    """An unconstrained word such as ``caller`` or ``calldata_1``."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        super().__init__(("i", name))

    def __repr__(self):
        return self.name


class Op(Term):
    __slots__ = ("name", "args")

    def __init__(self, name: str, args: tuple[Term, ...]):
        self.name = name
        self.args = tuple(args)
        super().__init__(("o", name, self.args))

    @property
    def children(self):
        return self.args

    def __repr__(self):
        return f"{self.name}({', '.join(map(repr, self.args))})"


class Sha3(Term):
    """keccak256 over `size` bytes laid out as consecutive 32-byte words."""

    __slots__ = ("words", "size")

    def __init__(self, words: tuple[Term, ...], size: int):
        self.words = tuple(words)
        self.size = size
        super().__init__(("h", self.words, size))

    @property
    def children(self):
        return self.words

    def __repr__(self):
        return f"sha3({', '.join(map(repr, self.words))})"


class StorageRead(Term):
    __slots__ = ("key",)

    def __init__(self, key: Term):
        self.key = key
        super().__init__(("s", key))

    @property
    def children(self):
        return (self.key,)

    def __repr__(self):
        return f"S[{self.key!r}]"


ZERO = Concrete(0)
ONE = Concrete(1)
_BOOLEAN = {"LT", "GT", "SLT", "SGT", "EQ", "ISZERO"}


def const(value: int) -> Concrete:
    return Concrete(value)


def op(name: str, *args: Term) -> Term:
    """Build an operator term, folding and simplifying where sound."""
    if all(a.is_concrete for a in args):
        return Concrete(arith.apply(name, [a.value for a in args]))
    if len(args) == 2:
        a, b = args
        if a == b:
            if name in ("EQ",):
                return ONE
            if name in ("SUB", "XOR", "LT", "GT", "SLT", "SGT"):
                return ZERO
            if name in ("AND", "OR"):
                return a
        if name in ("ADD", "OR", "XOR"):
            if a == ZERO:
                return b
            if b == ZERO:
                return a
        if name == "SUB" and b == ZERO:
            return a
        if name == "MUL":
            if ZERO in (a, b):
                return ZERO
            if a == ONE:
                return b
            if b == ONE:
                return a
        if name == "DIV" and b == ONE:
            return a
        if name == "AND":
            for m, x in ((a, b), (b, a)):
                if m.is_concrete:
                    if m.value == arith.MASK:
                        return x
                    if m.value == 0:
                        return ZERO
                    # AND(m, AND(m, y)) = AND(m, y)
                    if isinstance(x, Op) and x.name == "AND" and m in x.args:
                        return x
                    if m.value == 1 and isinstance(x, Op) and x.name in _BOOLEAN:
                        return x
    if name == "ISZERO":
        (a,) = args
        # ISZERO(ISZERO(ISZERO(x))) = ISZERO(x)
        if isinstance(a, Op) and a.name == "ISZERO":
            inner = a.args[0]
            if isinstance(inner, Op) and inner.name == "ISZERO":
                return inner
    return Op(name, tuple(args))


def sha3_term(words, size: int | None = None) -> Term:
    """Hash term over a memory slice given as 32-byte word terms."""
    words = tuple(words)
    if size is None:
        size = 32 * len(words)
    if all(w.is_concrete for w in words):
        data = b"".join(w.value.to_bytes(32, "big") for w in words)[:size]
        return Concrete(int.from_bytes(keccak256(data), "big"))
    return Sha3(words, size)


sha3 = sha3_term


def walk(term: Term) -> Iterator[Term]:
    """Every subterm, pre-order, including `term` itself (shared nodes once)."""
    seen = set()
    stack = [term]
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        seen.add(t)
        yield t
        stack.extend(reversed(t.children))


def contains(term: Term, sub: Term) -> bool:
    return any(t == sub for t in walk(term))


def inputs(term: Term) -> set[str]:
    return {t.name for t in walk(term) if isinstance(t, Input)}


def storage_reads(term: Term) -> list[StorageRead]:
    return [t for t in walk(term) if isinstance(t, StorageRead)]


def sha3_depth(term: Term) -> int:
    """Nesting depth of Sha3 nodes; a nested map lookup has depth 2."""
    if isinstance(term, Sha3):
        return 1 + max((sha3_depth(w) for w in term.words), default=0)
    return max((sha3_depth(c) for c in term.children), default=0)


class Unevaluable(Exception):
    pass


def evaluate(term: Term, env: Mapping[str, int],
             storage: Callable[[int], int] | None = None) -> int:
    """Concrete value of `term` given Input values and a storage reader."""
    cache: dict[Term, int] = {}

    def ev(t: Term) -> int:
        hit = cache.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Concrete):
            v = t.value
        elif isinstance(t, Input):
            if t.name not in env:
                raise Unevaluable(t.name)
            v = env[t.name] & arith.MASK
        elif isinstance(t, Op):
            v = arith.apply(t.name, [ev(a) for a in t.args])
        elif isinstance(t, Sha3):
            data = b"".join(ev(w).to_bytes(32, "big") for w in t.words)[:t.size]
            v = int.from_bytes(keccak256(data), "big")
        elif isinstance(t, StorageRead):
            if storage is None:
                raise Unevaluable(repr(t))
            v = storage(ev(t.key))
        else:  # pragma: no cover
            raise TypeError(t)
        cache[t] = v
        return v

    return ev(term)
