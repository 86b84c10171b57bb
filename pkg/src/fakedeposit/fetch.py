"""Fetch a contract's creation payload and runtime from an Etherscan-style API."""
from __future__ import annotations

import re
import threading
import time
from dataclasses import dataclass

import requests

from .bytecode.disasm import parse_hex
from .corpus import CorpusEntry

API_KEY_ENV = "FAKEDEPOSIT_API_KEY"
_ADDRESS = re.compile(r"^0x[0-9a-fA-F]{40}$")


class FetchError(Exception):
    pass


class NotAContract(FetchError):
    pass


@dataclass(frozen=True)
class FetchSource:
    base_url: str
    api_key: str | None = None
    rate_limit: float = 5.0  # requests per second
    retries: int = 3
    timeout: float = 30.0


class RateLimiter:
    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0:
            raise ValueError("rate_limit must be positive")
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._next = None
        self._lock = threading.Lock()

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            if self._next is not None and now < self._next:
                self._sleep(self._next - now)
                now = self._next
            self._next = now + self.interval


class EtherscanClient:
    """Thin, mockable wrapper: every request goes through :meth:`get`."""

    def __init__(self, source: FetchSource, session: requests.Session | None = None):
        self.source = source
        self.session = session or requests.Session()
        self.limiter = RateLimiter(source.rate_limit)

    def get(self, **params) -> dict:
        if self.source.api_key:
            params["apikey"] = self.source.api_key
        last = "no attempt made"
        for _ in range(self.source.retries + 1):
            self.limiter.wait()
            try:
                resp = self.session.get(self.source.base_url, params=params, timeout=self.source.timeout)
            except requests.RequestException as exc:
                last = f"request failed: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code != 200:
                raise FetchError(f"HTTP {resp.status_code}")
            try:
                body = resp.json()
            except ValueError:
                raise FetchError("response is not JSON") from None
            if not isinstance(body, dict):
                raise FetchError("response is not a JSON object")
            if "rate limit" in str(body.get("result", "")).lower():
                last = "rate limited by the API"
                continue
            return body
        raise FetchError(f"giving up after {self.source.retries + 1} attempts: {last}")

    def txlist(self, address: str) -> list[dict]:
        body = self.get(module="account", action="txlist", address=address,
                        startblock=0, endblock=99999999, sort="asc")
        result = body.get("result")
        if body.get("status") == "0" and "no transactions" in str(body.get("message", "")).lower():
            return []
        if not isinstance(result, list):
            raise FetchError(f"txlist: unexpected result {str(result)[:80]!r}")
        return result

    def get_code(self, address: str) -> bytes:
        body = self.get(module="proxy", action="eth_getCode", address=address, tag="latest")
        result = body.get("result")
        if not isinstance(result, str):
            raise FetchError("eth_getCode: missing result")
        try:
            return parse_hex(result)
        except ValueError:
            raise FetchError(f"eth_getCode: bad hex {result[:40]!r}") from None


def _order(tx: dict) -> tuple[int, int]:
    try:
        return int(tx.get("blockNumber", 0)), int(tx.get("transactionIndex", 0))
    except (TypeError, ValueError):
        raise FetchError(f"unparseable transaction ordering in {tx.get('hash')}") from None


def creation_transaction(txs: list[dict], address: str) -> dict:
    """The oldest transaction, which must be the one with an empty `to`."""
    if not txs:
        raise FetchError(f"{address}: no transactions")
    creations = [t for t in txs if not t.get("to")]
    if len(creations) > 1:
        raise FetchError(f"{address}: {len(creations)} transactions with empty 'to'; creation is ambiguous")
    oldest = min(txs, key=_order)
    if oldest.get("to"):
        raise FetchError(f"{address}: oldest transaction is not a contract creation")
    created = oldest.get("contractAddress")
    if created and created.lower() != address.lower():
        raise FetchError(f"{address}: creation transaction deployed {created}")
    return oldest


def fetch_entry(address: str, client: EtherscanClient) -> CorpusEntry:
    if not _ADDRESS.match(address):
        raise FetchError(f"not an address: {address!r}")
    address = address.lower()
    runtime = client.get_code(address)
    if not runtime:
        raise NotAContract(address)
    tx = creation_transaction(client.txlist(address), address)
    try:
        payload = parse_hex(tx.get("input", ""))
    except ValueError:
        raise FetchError(f"{address}: creation input is not hex") from None
    return CorpusEntry(address, payload, runtime)
