"""Operator and test-world entry points.

  nanogate serve       run the gate service
  nanogate mock-node   run the simulated node
  nanogate wallet      fund / change-rep / send against a (mock) node
  nanogate e2e         scripted full protocol flow against gate + node

Every command prints a machine-parseable last line on success (a hash, a
token, or "OK") and exits nonzero with diagnostics on stderr on failure.
"""

from __future__ import annotations

import math
import os
import secrets
import sys

import click
import httpx
import uvicorn

from . import codec, service
from .codec import RawAmount


def _fail(message: str, exit_code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(exit_code)


def _split_listen(listen: str) -> tuple[str, int]:
    host, _, port = listen.rpartition(":")
    try:
        return host or "127.0.0.1", int(port)
    except ValueError:
        _fail(f"bad listen address: {listen}")


def _rpc(node: str, payload: dict) -> dict:
    try:
        body = httpx.post(node, json=payload, timeout=10.0).json()
    except httpx.HTTPError as exc:
        _fail(f"node unreachable: {exc}")
    if "error" in body:
        _fail(f"node: {body['error']}")
    return body


def _parse_amount(amount: str, raw: bool) -> RawAmount:
    try:
        return RawAmount.parse(amount) if raw else RawAmount.from_xno(amount)
    except codec.CodecError as exc:
        _fail(f"bad amount {amount!r}: {exc}")


@click.group()
def main():
    """Micropayment access gate toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config file; GATE_* environment variables override it.")
def serve(config_path):
    """Run the gate service until interrupted."""
    try:
        config = service.load_config(config_path)
    except service.ConfigError as exc:
        _fail(str(exc), exit_code=2)
    app = service.create_app(config)
    try:
        probe = httpx.post(config.node_url,
                           json={"action": "account_info",
                                 "account": config.deposit_account,
                                 "representative": "true"}, timeout=5.0)
        click.echo(f"node probe: {config.node_url} reachable "
                   f"(status {probe.status_code})")
    except httpx.HTTPError as exc:
        click.echo(f"node probe: {config.node_url} UNREACHABLE ({exc})", err=True)
    host, port = _split_listen(config.listen_addr)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("mock-node")
@click.option("--listen", default="127.0.0.1:7076", show_default=True)
@click.option("--admin/--no-admin", default=True, show_default=True,
              help="Expose sim_* world-control actions.")
@click.option("--confirmation-delay", default="0", show_default=True,
              help="Seconds before new blocks confirm; accepts '5', '5s' or 'inf'.")
def mock_node_cmd(listen, admin, confirmation_delay):
    """Run the simulated Nano node."""
    from .ledger import SimLedger
    from .mock_node import create_app

    text = confirmation_delay.rstrip("s")
    try:
        delay = math.inf if text in ("inf", "infinity") else float(text)
    except ValueError:
        _fail(f"bad --confirmation-delay: {confirmation_delay}")
    ledger = SimLedger(confirmation_delay=delay)
    app = create_app(ledger, admin_enabled=admin)
    host, port = _split_listen(listen)
    click.echo(f"mock node on {listen} (admin={'on' if admin else 'off'}, "
               f"confirmation delay {delay}s)")
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group()
def wallet():
    """Simulated user wallet driving the mock node's admin actions."""


_node_option = click.option("--node", default="http://127.0.0.1:7076",
                            show_default=True, envvar="GATE_NODE_URL")
_raw_option = click.option("--raw", is_flag=True,
                           help="Interpret the amount as raw instead of XNO.")


@wallet.command()
@_node_option
@click.option("--account", required=True)
@click.option("--amount", required=True)
@_raw_option
def fund(node, account, amount, raw):
    """Credit an account out of thin air (test-world faucet)."""
    body = _rpc(node, {"action": "sim_mint", "account": account,
                       "amount": str(_parse_amount(amount, raw))})
    click.echo(body["hash"])


@wallet.command("change-rep")
@_node_option
@click.option("--account", required=True)
@click.option("--rep", required=True)
def change_rep(node, account, rep):
    """Append a change block setting the account's representative."""
    body = _rpc(node, {"action": "sim_change_representative",
                       "account": account, "representative": rep})
    click.echo(body["hash"])


@wallet.command()
@_node_option
@click.option("--from", "from_account", required=True)
@click.option("--to", required=True)
@click.option("--amount", required=True)
@_raw_option
def send(node, from_account, to, amount, raw):
    """Send from one simulated account to another."""
    body = _rpc(node, {"action": "sim_send", "from": from_account, "to": to,
                       "amount": str(_parse_amount(amount, raw))})
    click.echo(body["hash"])


@main.command()
@click.option("--gate", default="http://127.0.0.1:8080", show_default=True)
@click.option("--node", default="http://127.0.0.1:7076", show_default=True)
@click.option("--skip-payment", is_flag=True,
              help="Stop paying to demonstrate the 402 path.")
def e2e(gate, node, skip_payment):
    """Scripted full flow: session, rep change, payment, protected call."""
    payer = codec.encode_address(secrets.token_bytes(32))
    click.echo(f"[1] payer wallet {payer}")
    _rpc(node, {"action": "sim_mint", "account": payer, "amount": "1"})

    with httpx.Client(base_url=gate, timeout=10.0) as http:
        resp = http.post("/v1/sessions", json={"account": payer})
        if resp.status_code != 201:
            _fail(f"create session: {resp.status_code} {resp.text}")
        session = resp.json()
        sid = session["session_id"]
        challenge = session["challenge_representative"]
        click.echo(f"[2] session {sid} created (account history verified)")

        _rpc(node, {"action": "sim_change_representative",
                    "account": payer, "representative": challenge})
        click.echo(f"[3] representative changed to {challenge}")

        resp = http.post(f"/v1/sessions/{sid}/ownership/verify")
        if resp.status_code != 200:
            _fail(f"ownership verify: {resp.status_code} {resp.text}")
        spec_view = resp.json()
        amount = spec_view["amount_raw"]
        deposit = spec_view["deposit_account"]
        click.echo(f"[4] ownership verified; pay {amount} raw to {deposit}")

        if skip_payment:
            click.echo("[5] skipping payment as requested")
        else:
            _rpc(node, {"action": "sim_mint", "account": payer, "amount": amount})
            send_hash = _rpc(node, {"action": "sim_send", "from": payer,
                                    "to": deposit, "amount": amount})["hash"]
            click.echo(f"[5] paid with send block {send_hash}")

        resp = http.post(f"/v1/sessions/{sid}/payment/verify")
        if resp.status_code != 200:
            _fail(f"payment verify: {resp.status_code} {resp.text}",
                  exit_code=3 if resp.status_code == 402 else 1)
        token = resp.json()["access_token"]
        click.echo("[6] payment verified, token issued")

        resp = http.get("/v1/protected/search", params={"q": "hello gate"},
                        headers={"Authorization": f"Bearer {token}"})
        if resp.status_code != 200:
            _fail(f"protected call: {resp.status_code} {resp.text}")
        click.echo(f"[6+] protected search answered: {resp.json()['result']}")
        click.echo(token)


if __name__ == "__main__":
    main()
