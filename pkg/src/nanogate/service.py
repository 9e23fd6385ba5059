"""HTTP facade over the gate core.

Endpoints (all JSON):
  POST /v1/sessions                        start a session for a wallet address
  GET  /v1/sessions/{id}                   poll session state
  POST /v1/sessions/{id}/ownership/verify  check the representative change
  POST /v1/sessions/{id}/payment/verify    check payment; returns the token once
  GET  /v1/protected/search?q=...          the gated demo resource (bearer token)
  GET  /healthz                            node reachability probe

Every 4xx/5xx body is {"error": <code>, ...} with a machine-readable code.
Payment failures use 402 Payment Required. State is durable via append-only
JSON-lines logs in data_dir (sessions.jsonl + consumed.jsonl); replaying
them reconstructs the live store exactly, and grants are flushed to disk
before they are acknowledged.
"""

from __future__ import annotations

import json
import os
import threading
import time

from fastapi import FastAPI, Header, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import codec, gate, tokens
from .codec import RawAmount
from .gate import GateCore, GateError, Session
from .rpc_client import RpcClient, RpcError, TransportError
from .store import ConsumedHashStore, CorruptStore, StorageFailure


class ConfigError(Exception):
    pass


class GateConfig(BaseModel):
    listen_addr: str = "127.0.0.1:8080"
    node_url: str = "http://127.0.0.1:7076"
    deposit_account: str
    price_raw: str
    token_secret: str
    session_ttl_secs: int = 900
    token_ttl_secs: int = 600
    require_confirmation: bool = True
    data_dir: str | None = None
    max_open_sessions: int = 5
    cors_origins: list[str] = []

    def price(self) -> RawAmount:
        return RawAmount.parse(self.price_raw)

    def secret_bytes(self) -> bytes:
        return self.token_secret.encode()

    def validate_runtime(self) -> None:
        try:
            codec.decode_address(self.deposit_account)
        except codec.CodecError as exc:
            raise ConfigError(f"deposit_account: {exc.reason}") from exc
        try:
            price = self.price()
        except codec.CodecError as exc:
            raise ConfigError(f"price_raw: {exc.reason}") from exc
        if price.value <= 0:
            raise ConfigError("price_raw must be positive")
        if len(self.secret_bytes()) < 32:
            raise ConfigError("token_secret must be at least 32 bytes")
        if self.session_ttl_secs <= 0 or self.token_ttl_secs <= 0:
            raise ConfigError("TTLs must be positive")


_ENV_FIELDS = {
    "GATE_LISTEN_ADDR": ("listen_addr", str),
    "GATE_NODE_URL": ("node_url", str),
    "GATE_DEPOSIT_ACCOUNT": ("deposit_account", str),
    "GATE_PRICE_RAW": ("price_raw", str),
    "GATE_TOKEN_SECRET": ("token_secret", str),
    "GATE_SESSION_TTL_SECS": ("session_ttl_secs", int),
    "GATE_TOKEN_TTL_SECS": ("token_ttl_secs", int),
    "GATE_REQUIRE_CONFIRMATION": ("require_confirmation", lambda v: v.lower() in ("1", "true", "yes")),
    "GATE_DATA_DIR": ("data_dir", str),
}


def load_config(path: str | None = None, env: dict | None = None) -> GateConfig:
    """Config file values overridden by GATE_* environment variables."""
    env = os.environ if env is None else env
    values: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                values = json.load(f)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(values, dict):
            raise ConfigError("config file must hold a JSON object")
    for var, (field_name, convert) in _ENV_FIELDS.items():
        if var in env:
            try:
                values[field_name] = convert(env[var])
            except ValueError as exc:
                raise ConfigError(f"{var}: {exc}") from exc
    try:
        config = GateConfig(**values)
    except Exception as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
    config.validate_runtime()
    return config


class SessionLog:
    """Append-only session lifecycle log; one JSON object per line."""

    def __init__(self, path: str):
        self._path = path
        self._lock = threading.Lock()
        self._file = open(path, "a", encoding="utf-8")

    def append(self, event: str, session: Session) -> None:
        line = json.dumps({"event": event, "session": session.to_record()},
                          separators=(",", ":"))
        with self._lock:
            self._file.write(line + "\n")
            self._file.flush()
            os.fsync(self._file.fileno())

    def close(self):
        self._file.close()

    @staticmethod
    def replay(path: str) -> dict[str, Session]:
        """Latest snapshot per session id; torn final line ignored, any other
        corrupt line aborts startup."""
        if not os.path.exists(path):
            return {}
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        sessions: dict[str, Session] = {}
        for i, line in enumerate(lines):
            try:
                record = json.loads(line)
                session = Session.from_record(record["session"])
            except (ValueError, TypeError, KeyError):
                if i == len(lines) - 1:
                    continue
                raise CorruptStore(f"{path}:{i + 1}: unparseable session event")
            sessions[session.id] = session
        return sessions


_STATUS_BY_CODE = {
    "invalid_address": 400,
    "account_not_found": 404,
    "unknown_session": 404,
    "too_many_open_sessions": 429,
    "wrong_state": 409,
    "representative_mismatch": 409,
    "session_expired": 410,
    "payment_not_found": 402,
    "underpaid": 402,
    "unconfirmed_payment": 402,
    "node_unavailable": 503,
}


class CreateSessionRequest(BaseModel):
    account: str


def _session_view(core: GateCore, session: Session) -> dict:
    view = {
        "session_id": session.id,
        "payer": session.payer,
        "state": session.state,
        "challenge_representative": session.challenge_representative,
        "created_at": session.created_at,
        "expires_at": session.expires_at,
    }
    if session.state in ("awaiting_payment", "granted"):
        view.update({
            "deposit_account": session.deposit_account,
            "amount_raw": str(session.price),
            "amount_xno": session.price.to_xno(),
            "payment_uri": f"nano:{session.deposit_account}?amount={session.price}",
            "pay_by": session.expires_at,
        })
    return view


def create_app(config: GateConfig, clock=None) -> FastAPI:
    config.validate_runtime()
    clock = clock or (lambda: int(time.time()))

    session_log: SessionLog | None = None
    if config.data_dir:
        os.makedirs(config.data_dir, exist_ok=True)
        sessions_path = os.path.join(config.data_dir, "sessions.jsonl")
        restored = SessionLog.replay(sessions_path)
        store = ConsumedHashStore(os.path.join(config.data_dir, "consumed.jsonl"))
        session_log = SessionLog(sessions_path)
    else:
        restored = {}
        store = ConsumedHashStore()

    def on_event(event: str, session: Session) -> None:
        if session_log is not None:
            session_log.append(event, session)

    core = GateCore(
        rpc=RpcClient(config.node_url),
        deposit_account=config.deposit_account,
        price=config.price(),
        secret=config.secret_bytes(),
        store=store,
        session_ttl=config.session_ttl_secs,
        token_ttl=config.token_ttl_secs,
        require_confirmation=config.require_confirmation,
        max_open_sessions=config.max_open_sessions,
        on_event=on_event,
    )
    for session in restored.values():
        core.restore_session(session)

    app = FastAPI(title="nanogate", docs_url=None, redoc_url=None)
    app.state.core = core
    app.state.config = config
    app.state.requests_served = 0
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware, allow_origins=config.cors_origins,
            allow_methods=["*"], allow_headers=["*"],
        )

    @app.exception_handler(GateError)
    async def gate_error_handler(request: Request, exc: GateError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        body = {"error": exc.code}
        if exc.code == "invalid_address":
            body["reason"] = exc.details.get("reason")
        elif exc.code == "representative_mismatch":
            body["observed"] = exc.details.get("observed")
        elif exc.code == "underpaid":
            body["best_amount"] = exc.details.get("best_amount")
        return JSONResponse(body, status_code=status)

    @app.exception_handler(StorageFailure)
    async def storage_failure_handler(request: Request, exc: StorageFailure):
        return JSONResponse({"error": "storage_failure"}, status_code=500)

    @app.middleware("http")
    async def count_requests(request: Request, call_next):
        app.state.requests_served += 1
        return await call_next(request)

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionRequest):
        session = core.create_session(body.account, clock())
        return {
            "session_id": session.id,
            "state": session.state,
            "challenge_representative": session.challenge_representative,
            "expires_at": session.expires_at,
        }

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        core.expire_sessions(clock())
        return _session_view(core, core.get_session(session_id))

    @app.post("/v1/sessions/{session_id}/ownership/verify")
    def verify_ownership(session_id: str):
        session = core.verify_ownership(session_id, clock())
        view = _session_view(core, session)
        view.update(core.payment_spec(session_id))
        return view

    @app.post("/v1/sessions/{session_id}/payment/verify")
    def verify_payment(session_id: str):
        session = core.verify_payment(session_id, clock())
        # The token appears in exactly this one response; views never echo it.
        return {
            "state": "granted",
            "access_token": session.token,
            "token_expires_at": session.token_expires_at,
        }

    @app.get("/v1/protected/search")
    def protected_search(q: str = "", authorization: str = Header(default="")):
        if not authorization.startswith("Bearer "):
            return JSONResponse({"error": "missing_token"}, status_code=401)
        try:
            payload = core.verify_token(authorization[len("Bearer "):], clock())
        except tokens.TokenInvalid as exc:
            return JSONResponse({"error": "invalid_token", "reason": exc.reason},
                                status_code=401)
        words = q.split()
        return {
            "query": q,
            "result": {
                "word_count": len(words),
                "unique_words": len(set(words)),
                "echo": q[::-1],
            },
            "payer": payload["payer"],
        }

    @app.get("/healthz")
    def healthz():
        try:
            core.rpc.fetch_account_info(config.deposit_account)
            reachable = True
        except TransportError:
            reachable = False
        except RpcError:
            reachable = True  # node answered, just not usefully
        return {"node_reachable": reachable,
                "requests_served": app.state.requests_served}

    return app
