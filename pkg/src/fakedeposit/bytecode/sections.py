from __future__ import annotations

from dataclasses import dataclass, field

# CBOR maps emitted by solc carry one of these content-hash keys
_HASH_KEYS = (b"bzzr0", b"bzzr1", b"ipfs")


class SectionError(ValueError):
    pass


def find_metadata(runtime: bytes) -> bytes | None:
    """Return the solc content-hash trailer of `runtime`, if recognised.

    Both framings end in a 2-byte big-endian length of the CBOR map that
    precedes it: the legacy ``a1 65 'bzzr0' 58 20 <32 bytes> 00 29`` and the
    multi-key map (``a2 64 'ipfs' ...`` and friends).
    """
    if len(runtime) < 2:
        return None
    length = int.from_bytes(runtime[-2:], "big")
    if length == 0 or length + 2 > len(runtime):
        return None
    blob = runtime[-(length + 2):-2]
    if not 0xA1 <= blob[0] <= 0xA5:
        return None
    if not any(k in blob for k in _HASH_KEYS):
        return None
    return runtime[-(length + 2):]


def strip_metadata(runtime: bytes) -> bytes:
    meta = find_metadata(runtime)
    return runtime[:-len(meta)] if meta else runtime


@dataclass(frozen=True)
class CodeSections:
    creation: bytes
    runtime: bytes
    constructor_args: bytes
    metadata: bytes | None = None
    runtime_offset: int | None = None
    flags: tuple[str, ...] = field(default=())

    @property
    def init_code(self) -> bytes:
        """Constructor logic only: the creation bytes before the embedded runtime image."""
        if self.runtime_offset is None:
            return self.creation
        return self.creation[:self.runtime_offset]

    @property
    def payload(self) -> bytes:
        return self.creation + self.constructor_args


def split_sections(
    payload: bytes,
    runtime_observed: bytes,
    code_copies: list[tuple[int, int]] | None = None,
) -> CodeSections:
    """Split a deployment payload around the runtime image it returned.

    `creation` keeps the embedded runtime image so that
    ``creation + constructor_args == payload``; `init_code` is the part
    before it. When the returned code is not a verbatim substring (the
    constructor patched it), the last CODECOPY range of the constructor run
    that has the runtime's length locates the image instead.
    """
    payload = bytes(payload)
    runtime_observed = bytes(runtime_observed)
    meta = find_metadata(runtime_observed)
    if not runtime_observed:
        return CodeSections(payload, b"", b"", None, None, ("empty-runtime",))

    idx = payload.rfind(runtime_observed)
    flags: list[str] = []
    if idx < 0:
        idx = _locate_by_copy(payload, runtime_observed, code_copies or [])
        if idx is None:
            raise SectionError("runtime code is not embedded in the deployment payload")
        flags.append("patched-runtime")
    end = idx + len(runtime_observed)
    if idx == 0:
        flags.append("no-constructor")
    return CodeSections(
        creation=payload[:end],
        runtime=runtime_observed,
        constructor_args=payload[end:],
        metadata=meta,
        runtime_offset=idx,
        flags=tuple(flags),
    )


def _locate_by_copy(payload: bytes, runtime: bytes, copies: list[tuple[int, int]]) -> int | None:
    for offset, size in reversed(copies):
        if size == len(runtime) and offset + size <= len(payload):
            return offset
    return None
