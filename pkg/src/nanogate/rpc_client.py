"""Read-only client for the node RPC subset (mock node or a public node).

Strictly an observer: no mutating action is ever exposed. Every field of
every view is validated through the codec; a response that parses as JSON
but fails validation is a MalformedResponse, never a silent default.
Missing accounts and blocks are normal outcomes (None), not errors.
"""

from __future__ import annotations

from dataclasses import dataclass

import httpx

from . import codec
from .codec import CodecError, RawAmount


class RpcError(Exception):
    pass


class TransportError(RpcError):
    """Could not reach the node (connect failure, timeout)."""


class NodeError(RpcError):
    """The node answered with an in-body error we do not special-case."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MalformedResponse(RpcError):
    """The node's response violates the wire contract."""


@dataclass(frozen=True)
class AccountInfoView:
    frontier: str
    balance: RawAmount
    block_count: int
    representative: str
    confirmation_height: int


@dataclass(frozen=True)
class HistoryEntryView:
    kind: str
    counterparty: str
    amount: RawAmount
    hash: str
    height: int
    confirmed: bool
    local_timestamp: int


@dataclass(frozen=True)
class BlockView:
    account: str
    kind: str
    amount: RawAmount
    height: int
    confirmed: bool
    destination: str | None  # set for sends
    representative: str


class RpcClient:
    def __init__(self, node_url: str, timeout: float = 5.0, http: httpx.Client | None = None):
        self.node_url = node_url
        self._http = http or httpx.Client(timeout=timeout)

    def _call(self, payload: dict) -> dict:
        try:
            response = self._http.post(self.node_url, json=payload)
            response.raise_for_status()
            body = response.json()
        except httpx.HTTPError as exc:
            raise TransportError(f"node request failed: {exc}") from exc
        except ValueError as exc:
            raise MalformedResponse(f"node response is not JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise MalformedResponse("node response is not a JSON object")
        return body

    @staticmethod
    def _field(body: dict, key: str) -> str:
        value = body.get(key)
        if not isinstance(value, str):
            raise MalformedResponse(f"missing or non-string field {key!r}")
        return value

    @staticmethod
    def _uint(body: dict, key: str) -> int:
        text = RpcClient._field(body, key)
        if not text.isdigit():
            raise MalformedResponse(f"field {key!r} is not an unsigned decimal: {text!r}")
        return int(text)

    def fetch_account_info(self, account: str) -> AccountInfoView | None:
        """Returns None for unopened accounts (a normal protocol outcome)."""
        codec.decode_address(account)
        body = self._call({"action": "account_info", "account": account,
                           "representative": "true"})
        if body.get("error") == "Account not found":
            return None
        if "error" in body:
            raise NodeError(str(body["error"]))
        try:
            view = AccountInfoView(
                frontier=codec.parse_block_hash(self._field(body, "frontier")),
                balance=RawAmount.parse(self._field(body, "balance")),
                block_count=self._uint(body, "block_count"),
                representative=self._field(body, "representative"),
                confirmation_height=self._uint(body, "confirmation_height"),
            )
            codec.decode_address(view.representative)
        except CodecError as exc:
            raise MalformedResponse(f"invalid account_info field: {exc}") from exc
        if view.confirmation_height > view.block_count:
            raise MalformedResponse("confirmation_height exceeds block_count")
        return view

    def fetch_history(self, account: str, count: int,
                      head: str | None = None) -> tuple[list[HistoryEntryView], str | None]:
        """Newest-first entries plus the head hash of the next page, if any."""
        if not 1 <= count <= 500:
            raise ValueError("count must be between 1 and 500")
        codec.decode_address(account)
        payload = {"action": "account_history", "account": account, "count": str(count)}
        if head is not None:
            payload["head"] = head
        body = self._call(payload)
        if body.get("error") == "Account not found":
            return [], None
        if "error" in body:
            raise NodeError(str(body["error"]))
        raw_entries = body.get("history")
        if not isinstance(raw_entries, list):
            raise MalformedResponse("missing history array")
        entries = []
        try:
            for raw in raw_entries:
                if not isinstance(raw, dict):
                    raise MalformedResponse("history entry is not an object")
                kind = self._field(raw, "type")
                if kind not in ("send", "receive", "change"):
                    raise MalformedResponse(f"unknown history entry type {kind!r}")
                entry = HistoryEntryView(
                    kind=kind,
                    counterparty=self._field(raw, "account"),
                    amount=RawAmount.parse(self._field(raw, "amount")),
                    hash=codec.parse_block_hash(self._field(raw, "hash")),
                    height=self._uint(raw, "height"),
                    confirmed=self._field(raw, "confirmed") == "true",
                    local_timestamp=self._uint(raw, "local_timestamp"),
                )
                codec.decode_address(entry.counterparty)
                if entry.kind == "change" and entry.amount.value != 0:
                    raise MalformedResponse("change entry with nonzero amount")
                entries.append(entry)
            next_head = body.get("previous")
            if next_head is not None:
                next_head = codec.parse_block_hash(next_head)
        except CodecError as exc:
            raise MalformedResponse(f"invalid history field: {exc}") from exc
        return entries, next_head

    def fetch_block(self, block_hash: str) -> BlockView | None:
        """Returns None for unknown blocks."""
        block_hash = codec.parse_block_hash(block_hash)
        body = self._call({"action": "block_info", "json_block": "true", "hash": block_hash})
        if body.get("error") == "Block not found":
            return None
        if "error" in body:
            raise NodeError(str(body["error"]))
        contents = body.get("contents")
        if not isinstance(contents, dict):
            raise MalformedResponse("missing block contents")
        try:
            kind = self._field(body, "subtype")
            if kind not in ("send", "receive", "change"):
                raise MalformedResponse(f"unknown block subtype {kind!r}")
            destination = None
            if kind == "send":
                destination = self._field(contents, "link_as_account")
                codec.decode_address(destination)
            view = BlockView(
                account=self._field(body, "block_account"),
                kind=kind,
                amount=RawAmount.parse(self._field(body, "amount")),
                height=self._uint(body, "height"),
                confirmed=self._field(body, "confirmed") == "true",
                destination=destination,
                representative=self._field(contents, "representative"),
            )
            codec.decode_address(view.account)
        except CodecError as exc:
            raise MalformedResponse(f"invalid block_info field: {exc}") from exc
        return view

    def close(self):
        self._http.close()
