"""Explorer-shaped data plane: a fixture server that answers recorded
chain data over HTTP, and a rate-limited client that fetches everything
a replay needs.

Endpoints follow the familiar query-param style, each wrapped in a
``{"status": "1", "message": "OK", "result": ...}`` envelope:

    ?module=contract&action=getsourcecode&address=A
    ?module=account&action=txlist&address=A&limit=T
    ?module=logs&action=getLogs&address=A
    ?module=account&action=balancehistory&address=A&blockno=N
    ?module=account&action=txlistinternal&txhash=H
    ?module=account&action=txlistinternal&address=A

Unknown addresses produce a status "0" envelope with an empty result.
The internal-transaction listing is queryable both by parent
transaction hash (needed to recover internally created contracts) and
by address (needed to see calls arriving from other contracts).
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import parse_qs, urlparse

import requests

from .addresses import Address
from .chain import EventRecord
from .mcl.compiler import InterfaceDesc
from .wire import canonical_json, decode_args, event_from_json

DEFAULT_MIN_INTERVAL_MS = 350
DEFAULT_PAUSE_EVERY = 5
DEFAULT_PAUSE_MS = 1000
MAX_RETRIES = 3

ENV_URL = "EXPLORER_URL"
ENV_MIN_INTERVAL = "EXPLORER_MIN_INTERVAL_MS"


class ExplorerError(Exception):
    pass


class TransportError(ExplorerError):
    """A request that kept failing at the network level."""


class FixtureError(Exception):
    pass


# ── fixture store ────────────────────────────────────────────────────────────


class FixtureStore:
    """Indexed view over one fixture stream."""

    def __init__(self) -> None:
        self.meta: dict = {}
        self.sources: dict[str, dict] = {}
        self.txlists: dict[str, list[dict]] = {}
        self.logs: dict[str, list[dict]] = {}
        self.balances: dict[tuple[str, int], str] = {}
        self.internal_by_parent: dict[str, list[dict]] = {}
        self.internal_by_address: dict[str, list[dict]] = {}
        self.max_block = 0

    @classmethod
    def load(cls, lines: list[str]) -> "FixtureStore":
        store = cls()
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                store._ingest(record)
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FixtureError(f"malformed fixture line {lineno}: {exc}")
        for rows in store.txlists.values():
            rows.sort(key=lambda r: (r["block_number"], r["_index"]))
        return store

    @classmethod
    def load_path(cls, path: str) -> "FixtureStore":
        with open(path, encoding="utf-8") as handle:
            return cls.load(handle.readlines())

    def _ingest(self, record: dict) -> None:
        kind = record["kind"]
        if kind == "meta":
            self.meta = record
        elif kind == "genesis":
            record["accounts"]  # shape check only
        elif kind == "source":
            self.sources[record["address"]] = record
        elif kind == "block":
            self.max_block = max(self.max_block, int(record["number"]))
        elif kind == "tx":
            row = dict(record)
            row.pop("kind")
            row["_index"] = len(self.txlists.get(self._tx_owner(row), []))
            self.txlists.setdefault(self._tx_owner(row), []).append(row)
        elif kind == "event":
            row = dict(record)
            row.pop("kind")
            self.logs.setdefault(record["emitter"], []).append(row)
        elif kind == "internal_tx":
            row = dict(record)
            row.pop("kind")
            self.internal_by_parent.setdefault(record["parent_tx"], []).append(row)
            for key in {record["from"], record["to"], record["creates"]}:
                if key:
                    self.internal_by_address.setdefault(key, []).append(row)
        elif kind == "balance":
            self.balances[(record["address"], int(record["block"]))] = \
                record["value"]
        else:
            raise FixtureError(f"unknown record kind {kind!r}")

    @staticmethod
    def _tx_owner(row: dict) -> str:
        return row["to"] or row["creates"]

    # ── queries ──────────────────────────────────────────────────────

    def getsourcecode(self, address: str) -> Optional[dict]:
        record = self.sources.get(address)
        if record is None:
            return None
        return {
            "source": record["source"],
            "contract": record["contract"],
            "interface": record["interface"],
            "creation_tx_hash": record["creation_tx_hash"],
            "created_internal": record["created_internal"],
        }

    def txlist(self, address: str, limit: Optional[int]) -> list[dict]:
        rows = [dict(r) for r in self.txlists.get(address, [])]
        for row in rows:
            row.pop("_index", None)
        if limit is not None:
            rows = rows[:limit]
        return rows

    def get_logs(self, address: str) -> list[dict]:
        return list(self.logs.get(address, []))

    def balance_history(self, address: str, block: int) -> Optional[str]:
        if block > self.max_block or block < 0:
            return None
        return self.balances.get((address, block), "0")

    def internal_txs(self, txhash: Optional[str] = None,
                     address: Optional[str] = None) -> list[dict]:
        if txhash is not None:
            return list(self.internal_by_parent.get(txhash, []))
        return list(self.internal_by_address.get(address, []))


# ── server ───────────────────────────────────────────────────────────────────


def _envelope(result, ok: bool = True, message: str = "OK") -> bytes:
    status = "1" if ok else "0"
    if not ok and message == "OK":
        message = "No record found"
    return canonical_json(
        {"status": status, "message": message, "result": result}).encode()


class _Handler(BaseHTTPRequestHandler):
    store: FixtureStore  # attached per server class

    def log_message(self, *args) -> None:  # silence request logging
        pass

    def do_GET(self) -> None:
        params = {k: v[0] for k, v in
                  parse_qs(urlparse(self.path).query).items()}
        body = self._answer(params)
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _answer(self, params: dict[str, str]) -> bytes:
        store = self.store
        module = params.get("module", "")
        action = params.get("action", "")
        if module == "contract" and action == "getsourcecode":
            record = store.getsourcecode(params.get("address", ""))
            if record is None:
                return _envelope({}, ok=False)
            return _envelope(record)
        if module == "account" and action == "txlist":
            address = params.get("address", "")
            limit = int(params["limit"]) if "limit" in params else None
            rows = store.txlist(address, limit)
            if not rows and address not in store.sources:
                return _envelope([], ok=False)
            return _envelope(rows)
        if module == "logs" and action == "getLogs":
            return _envelope(store.get_logs(params.get("address", "")))
        if module == "account" and action == "balancehistory":
            value = store.balance_history(params.get("address", ""),
                                          int(params.get("blockno", "-1")))
            if value is None:
                return _envelope("", ok=False, message="Unknown block")
            return _envelope(value)
        if module == "account" and action == "txlistinternal":
            if "txhash" in params:
                return _envelope(store.internal_txs(txhash=params["txhash"]))
            return _envelope(store.internal_txs(address=params.get("address", "")))
        return _envelope("", ok=False, message="Unknown action")


@dataclass
class ServerHandle:
    server: ThreadingHTTPServer
    thread: threading.Thread

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def close(self) -> None:
        self.server.shutdown()
        self.server.server_close()
        self.thread.join(timeout=5)


def serve(store_or_lines, host: str = "127.0.0.1",
          port: int = 0) -> ServerHandle:
    """Start a fixture server on a background thread; port 0 picks a
    free port. Returns a handle with ``.url`` and ``.close()``."""
    if isinstance(store_or_lines, FixtureStore):
        store = store_or_lines
    else:
        store = FixtureStore.load(list(store_or_lines))

    class BoundHandler(_Handler):
        pass

    BoundHandler.store = store
    server = ThreadingHTTPServer((host, port), BoundHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return ServerHandle(server, thread)


# ── rate-limited client ──────────────────────────────────────────────────────


@dataclass
class RateLimiterPolicy:
    """Spacing policy for explorer requests: every request is at least
    min_interval_ms after the previous one, and after every pause_every
    requests the next gap grows by pause_ms."""

    min_interval_ms: int = DEFAULT_MIN_INTERVAL_MS
    pause_every: int = DEFAULT_PAUSE_EVERY
    pause_ms: int = DEFAULT_PAUSE_MS


class SystemClock:
    def monotonic(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class RateLimiter:
    def __init__(self, policy: RateLimiterPolicy, clock=None):
        self.policy = policy
        self.clock = clock or SystemClock()
        self.requests_made = 0
        self._last: Optional[float] = None

    def wait_turn(self) -> None:
        gap = self.policy.min_interval_ms / 1000.0
        if (self.policy.pause_every > 0 and self.requests_made > 0
                and self.requests_made % self.policy.pause_every == 0):
            gap += self.policy.pause_ms / 1000.0
        if self._last is not None:
            wake = self._last + gap
            now = self.clock.monotonic()
            if wake > now:
                self.clock.sleep(wake - now)
        self._last = self.clock.monotonic()
        self.requests_made += 1


def _default_transport(url: str) -> str:
    response = requests.get(url, timeout=30)
    response.raise_for_status()
    return response.text


@dataclass
class HistoricTx:
    """One row of a contract's transaction list, receipt fields included."""

    hash: str
    from_: Address
    to: Optional[Address]
    value: int
    gas_limit: int
    method: str
    args: list
    arg_types: list[str]
    block_number: int
    timestamp: int
    status: str
    gas_used: int
    failure_reason: Optional[str]
    creates: Optional[Address] = None
    origin: str = "external"
    parent_tx: Optional[str] = None

    @classmethod
    def from_row(cls, row: dict) -> "HistoricTx":
        return cls(
            hash=row["hash"],
            from_=Address.from_hex(row["from"]),
            to=Address.from_hex(row["to"]) if row["to"] else None,
            value=int(row["value"]),
            gas_limit=int(row["gas_limit"]),
            method=row["method"],
            args=decode_args(row["args"]),
            arg_types=[a["type"] for a in row["args"]],
            block_number=int(row["block_number"]),
            timestamp=int(row["timestamp"]),
            status=row.get("status", "success"),
            gas_used=int(row.get("gas_used", "0") or "0"),
            failure_reason=row.get("failure_reason") or None,
            creates=Address.from_hex(row["creates"]) if row.get("creates")
            else None,
            origin=row.get("origin", "external"),
            parent_tx=row.get("parent_tx") or None,
        )


@dataclass
class HistoricBundle:
    """Everything fetched from the explorer about one contract."""

    contract_address: Address
    contract_name: str
    source_text: str
    interface: InterfaceDesc
    creation_tx: HistoricTx
    created_internal: bool
    transactions: list[HistoricTx]
    event_logs: list[EventRecord]
    balances: dict[tuple[str, int], int]  # (address hex, block) -> balance
    internal_trace: dict[str, list[HistoricTx]]  # parent hash -> internals
    tx_limit_requested: int
    clamped: bool = False
    partial: bool = False

    @property
    def tx_count(self) -> int:
        return len(self.transactions)

    def incoming_internal_txs(self) -> list[HistoricTx]:
        mine = self.contract_address
        rows = []
        for txs in self.internal_trace.values():
            for tx in txs:
                if tx.to == mine or tx.creates == mine:
                    rows.append(tx)
        return rows


class ExplorerClient:
    """Fetches replay inputs from a fixture server, pacing requests per
    the rate-limit policy and retrying transient failures."""

    def __init__(self, base_url: str,
                 policy: Optional[RateLimiterPolicy] = None,
                 transport: Optional[Callable[[str], str]] = None,
                 clock=None):
        self.base_url = base_url.rstrip("/")
        self.limiter = RateLimiter(policy or RateLimiterPolicy(), clock=clock)
        self.transport = transport or _default_transport
        self.clock = self.limiter.clock

    def _get(self, **params) -> object:
        query = "&".join(f"{k}={v}" for k, v in params.items())
        url = f"{self.base_url}/?{query}"
        last_error: Optional[Exception] = None
        for attempt in range(MAX_RETRIES + 1):
            self.limiter.wait_turn()
            try:
                body = self.transport(url)
                break
            except Exception as exc:  # noqa: BLE001 - transport-defined
                last_error = exc
                if attempt == MAX_RETRIES:
                    raise TransportError(
                        f"request failed after {MAX_RETRIES} retries: {exc}")
                self.clock.sleep(0.2 * (2 ** attempt))
        envelope = json.loads(body)
        if envelope.get("status") != "1":
            raise ExplorerError(envelope.get("message", "explorer error"))
        return envelope["result"]

    def fetch_bundle(self, address: Address, tx_limit: int) -> HistoricBundle:
        """Download source, interface, the first ``tx_limit`` transactions,
        event logs, balances, and the internal trace for one contract."""
        addr_hex = address.hex()
        source = self._get(module="contract", action="getsourcecode",
                           address=addr_hex)
        interface = InterfaceDesc.from_json(source["interface"])
        created_internal = bool(source["created_internal"])
        creation_hash = source["creation_tx_hash"]

        rows = self._get(module="account", action="txlist", address=addr_hex,
                         limit=tx_limit + 1)
        txs = [HistoricTx.from_row(r) for r in rows]
        creation = next((t for t in txs if t.creates == address), None)
        method_txs = [t for t in txs if t.creates is None]
        clamped = len(method_txs) < tx_limit
        method_txs = method_txs[:tx_limit]

        internal_trace: dict[str, list[HistoricTx]] = {}
        seen_internal: set[str] = set()

        def add_internal(tx: HistoricTx) -> None:
            if tx.hash not in seen_internal:
                seen_internal.add(tx.hash)
                internal_trace.setdefault(tx.parent_tx or "", []).append(tx)

        internal_rows = self._get(module="account", action="txlistinternal",
                                  address=addr_hex)
        for row in internal_rows:
            add_internal(HistoricTx.from_row(row))

        if creation is None and created_internal:
            rows = self._get(module="account", action="txlistinternal",
                             txhash=creation_hash)
            for row in rows:
                tx = HistoricTx.from_row(row)
                if tx.creates == address:
                    creation = tx
                add_internal(tx)
        if creation is None:
            raise ExplorerError(
                f"could not recover the creation transaction of {addr_hex}")

        partial = False
        log_rows = self._get(module="logs", action="getLogs", address=addr_hex)
        known_hashes = {t.hash for t in method_txs}
        event_logs = [event_from_json(r) for r in log_rows
                      if r["tx_hash"] in known_hashes]

        balances: dict[tuple[str, int], int] = {}
        for tx in method_txs:
            for who in (tx.from_, address):
                key = (who.hex(), tx.block_number)
                if key in balances:
                    continue
                try:
                    value = self._get(module="account",
                                      action="balancehistory",
                                      address=key[0], blockno=key[1])
                    balances[key] = int(value)
                except TransportError:
                    raise
                except ExplorerError:
                    # data gap on the explorer side: usable but incomplete
                    partial = True

        return HistoricBundle(
            contract_address=address,
            contract_name=source["contract"],
            source_text=source["source"],
            interface=interface,
            creation_tx=creation,
            created_internal=created_internal,
            transactions=method_txs,
            event_logs=event_logs,
            balances=balances,
            internal_trace=internal_trace,
            tx_limit_requested=tx_limit,
            clamped=clamped,
            partial=partial,
        )
