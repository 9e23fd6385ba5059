"""Mock Nano node: the RPC subset the gate relies on, backed by SimLedger.

Wire contract ("RPC subset contract"):
  * single JSON object per POST to "/", dispatched on "action"
  * every numeric field travels as a decimal string, never a JSON number
    (raw values exceed 64-bit float precision)
  * domain errors come back as {"error": "<message>"} with HTTP 200; the
    error strings "Account not found", "Bad account number", "Block not
    found" and "Unknown command" match real node behavior so a client
    cannot tell mock from mainnet
  * sim_* admin actions (mint / send / receive / change_representative /
    set_confirmed) control the simulated world; they are NOT part of the
    real node RPC and are rejected with {"error": "Admin disabled"} unless
    the server was started with admin enabled

Deliberate divergence from real nodes: account_history includes change
blocks (real nodes hide them unless raw mode is requested). The gate
verifies representatives via account_info, so this only aids observability.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import codec, ledger as ledger_mod
from .codec import CodecError, RawAmount
from .ledger import LedgerError, SimLedger


def _bad_account(text) -> bool:
    return not isinstance(text, str) or not codec.is_valid_address(text)


def _history_entry(ledger: SimLedger, block) -> dict:
    if block.kind == "send":
        counterparty = block.link
    elif block.kind == "change":
        counterparty = block.representative
    else:  # receive: source account, or self for minted credits
        source = ledger._blocks.get(block.link) if block.link else None
        counterparty = source.account if source else block.account
    return {
        "type": block.kind,
        "account": counterparty,
        "amount": str(block.amount),
        "hash": block.hash,
        "height": str(block.height),
        "local_timestamp": str(block.local_timestamp),
        "confirmed": "true" if ledger.is_confirmed(block) else "false",
    }


def create_app(ledger: SimLedger, admin_enabled: bool = True) -> FastAPI:
    app = FastAPI(title="nanogate mock node", docs_url=None, redoc_url=None)

    @app.post("/")
    async def rpc(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "Unable to parse JSON"})
        if not isinstance(body, dict):
            return JSONResponse({"error": "Unable to parse JSON"})
        action = body.get("action")
        handler = _HANDLERS.get(action)
        if handler is None:
            return JSONResponse({"error": "Unknown command"})
        if action.startswith("sim_") and not admin_enabled:
            return JSONResponse({"error": "Admin disabled"})
        try:
            return JSONResponse(handler(ledger, body))
        except LedgerError as exc:
            return JSONResponse({"error": exc.code})
        except CodecError as exc:
            return JSONResponse({"error": f"codec: {exc.reason}"})

    return app


def _account_info(ledger: SimLedger, body: dict) -> dict:
    account = body.get("account")
    if _bad_account(account):
        return {"error": "Bad account number"}
    try:
        info = ledger.account_info(account)
    except ledger_mod.UnknownAccount:
        return {"error": "Account not found"}
    return {
        "frontier": info["frontier"],
        "balance": str(info["balance"]),
        "block_count": str(info["height"]),
        "representative": info["representative"],
        "confirmation_height": str(info["confirmation_height"]),
    }


def _account_history(ledger: SimLedger, body: dict) -> dict:
    account = body.get("account")
    if _bad_account(account):
        return {"error": "Bad account number"}
    try:
        count = int(body.get("count", "1"))
    except (TypeError, ValueError):
        return {"error": "Invalid count"}
    head = body.get("head")
    if head is not None:
        head = codec.parse_block_hash(head)
    try:
        entries, next_head = ledger.history(account, max(count, 1), head)
    except ledger_mod.UnknownAccount:
        return {"error": "Account not found"}
    except ledger_mod.UnknownBlock:
        return {"error": "Block not found"}
    response = {
        "account": account,
        "history": [_history_entry(ledger, b) for b in entries],
    }
    if next_head is not None:
        response["previous"] = next_head
    return response


def _block_info(ledger: SimLedger, body: dict) -> dict:
    try:
        block_hash = codec.parse_block_hash(body.get("hash") or "")
    except CodecError:
        return {"error": "Block not found"}
    try:
        block = ledger.block_info(block_hash)
    except ledger_mod.UnknownBlock:
        return {"error": "Block not found"}
    contents = {"representative": block.representative}
    if block.kind == "send":
        contents["link_as_account"] = block.link
    return {
        "block_account": block.account,
        "amount": str(block.amount),
        "height": str(block.height),
        "confirmed": "true" if ledger.is_confirmed(block) else "false",
        "subtype": block.kind,
        "contents": contents,
    }


def _sim_mint(ledger: SimLedger, body: dict) -> dict:
    return {"hash": ledger.mint(body.get("account", ""), RawAmount.parse(body.get("amount", "")))}


def _sim_send(ledger: SimLedger, body: dict) -> dict:
    return {"hash": ledger.send(body.get("from", ""), body.get("to", ""),
                                RawAmount.parse(body.get("amount", "")))}


def _sim_receive(ledger: SimLedger, body: dict) -> dict:
    return {"hash": ledger.receive(body.get("account", ""),
                                   codec.parse_block_hash(body.get("hash") or ""))}


def _sim_change_representative(ledger: SimLedger, body: dict) -> dict:
    return {"hash": ledger.change_representative(body.get("account", ""),
                                                 body.get("representative", ""))}


def _sim_set_confirmed(ledger: SimLedger, body: dict) -> dict:
    ledger.set_confirmed(codec.parse_block_hash(body.get("hash") or ""),
                         body.get("confirmed", "true") == "true")
    return {"success": ""}


_HANDLERS = {
    "account_info": _account_info,
    "account_history": _account_history,
    "block_info": _block_info,
    "sim_mint": _sim_mint,
    "sim_send": _sim_send,
    "sim_receive": _sim_receive,
    "sim_change_representative": _sim_change_representative,
    "sim_set_confirmed": _sim_set_confirmed,
}
