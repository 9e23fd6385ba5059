"""Gate core: the six-step access-gate state machine.

A session walks awaiting_ownership -> awaiting_payment -> granted; any
non-granted state can fall to expired (deadline) or failed. Ownership is
proven by setting the account representative to a per-session gate-derived
address; payment is proven by a confirmed send to the deposit account, at
or above the configured price, made AFTER the session's frontier-height
snapshot, whose hash has never been exchanged for a token before.

The frontier-height snapshot (not timestamps) anchors "paid after the
challenge": heights are totally ordered per account and immune to clock
skew. The consumed-hash store makes every granted send single-use, so each
access attempt costs a fresh payment.
"""

from __future__ import annotations

import hmac
import secrets as _secrets
import threading
from dataclasses import dataclass, field

from . import codec, tokens
from .codec import RawAmount
from .rpc_client import RpcClient, RpcError, TransportError
from .store import ConsumedHashStore, StorageFailure

HISTORY_PAGE_SIZE = 50
MAX_HISTORY_PAGES = 4

STATES = ("awaiting_ownership", "awaiting_payment", "granted", "expired", "failed")


class GateError(Exception):
    code = "gate_error"

    def __init__(self, message: str = "", **details):
        super().__init__(message or self.code)
        self.details = details


class InvalidAddress(GateError):
    code = "invalid_address"

    def __init__(self, reason: str):
        super().__init__(f"invalid address: {reason}", reason=reason)
        self.reason = reason


class AccountNotOpened(GateError):
    code = "account_not_found"


class NodeUnavailable(GateError):
    code = "node_unavailable"


class TooManyOpenSessions(GateError):
    code = "too_many_open_sessions"


class UnknownSession(GateError):
    code = "unknown_session"


class WrongState(GateError):
    code = "wrong_state"


class SessionExpired(GateError):
    code = "session_expired"


class RepresentativeMismatch(GateError):
    code = "representative_mismatch"

    def __init__(self, observed: str):
        super().__init__(f"representative is {observed}", observed=observed)
        self.observed = observed


class PaymentNotFound(GateError):
    code = "payment_not_found"


class Underpaid(GateError):
    code = "underpaid"

    def __init__(self, best_amount: RawAmount):
        super().__init__(f"best send amount {best_amount}", best_amount=str(best_amount))
        self.best_amount = best_amount


class UnconfirmedPayment(GateError):
    code = "unconfirmed_payment"


@dataclass
class Session:
    id: str
    payer: str
    state: str
    challenge_representative: str
    frontier_height_at_creation: int
    price: RawAmount
    deposit_account: str
    created_at: int
    expires_at: int
    consumed_send_hash: str | None = None
    token: str | None = None
    token_expires_at: int | None = None

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "payer": self.payer,
            "state": self.state,
            "challenge_representative": self.challenge_representative,
            "frontier_height_at_creation": self.frontier_height_at_creation,
            "price": str(self.price),
            "deposit_account": self.deposit_account,
            "created_at": self.created_at,
            "expires_at": self.expires_at,
            "consumed_send_hash": self.consumed_send_hash,
            "token_expires_at": self.token_expires_at,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Session":
        return cls(
            id=record["id"],
            payer=record["payer"],
            state=record["state"],
            challenge_representative=record["challenge_representative"],
            frontier_height_at_creation=record["frontier_height_at_creation"],
            price=RawAmount.parse(record["price"]),
            deposit_account=record["deposit_account"],
            created_at=record["created_at"],
            expires_at=record["expires_at"],
            consumed_send_hash=record.get("consumed_send_hash"),
            token_expires_at=record.get("token_expires_at"),
        )


def derive_challenge_representative(session_id: str, gate_secret: bytes) -> str:
    """Deterministic per-session representative the user must adopt.

    A fixed, publicly known target could be front-run by anyone who watched
    an earlier session; an HMAC of the session id is unpredictable without
    the gate secret, so only a party steering THIS session's wallet can match.
    """
    pseudo_key = hmac.new(gate_secret, b"rep:" + session_id.encode(), "sha256").digest()
    return codec.encode_address(pseudo_key)


class GateCore:
    """Pull-based verification engine. Transitions serialize per session id;
    distinct sessions proceed fully in parallel."""

    def __init__(self, rpc: RpcClient, deposit_account: str, price: RawAmount,
                 secret: bytes, store: ConsumedHashStore,
                 session_ttl: int = 900, token_ttl: int = 600,
                 require_confirmation: bool = True, max_open_sessions: int = 5,
                 on_event=None):
        codec.decode_address(deposit_account)
        if price.value <= 0:
            raise ValueError("price must be positive")
        self.rpc = rpc
        self.deposit_account = deposit_account
        self.price = price
        self.secret = secret
        self.store = store
        self.session_ttl = session_ttl
        self.token_ttl = token_ttl
        self.require_confirmation = require_confirmation
        self.max_open_sessions = max_open_sessions
        self._on_event = on_event or (lambda event, session: None)
        self._sessions: dict[str, Session] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    # -- session registry --

    def restore_session(self, session: Session) -> None:
        with self._registry_lock:
            self._sessions[session.id] = session
            self._session_locks.setdefault(session.id, threading.Lock())

    def get_session(self, session_id: str) -> Session:
        with self._registry_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id}")
        return session

    def sessions(self) -> list[Session]:
        with self._registry_lock:
            return list(self._sessions.values())

    def _lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            lock = self._session_locks.get(session_id)
        if lock is None:
            raise UnknownSession(f"no session {session_id}")
        return lock

    # -- operations --

    def create_session(self, payer_text: str, now: int) -> Session:
        self.expire_sessions(now)
        try:
            codec.decode_address(payer_text)
        except codec.CodecError as exc:
            raise InvalidAddress(exc.reason) from exc
        with self._registry_lock:
            open_count = sum(
                1 for s in self._sessions.values()
                if s.payer == payer_text and s.state in ("awaiting_ownership", "awaiting_payment")
            )
        if open_count >= self.max_open_sessions:
            raise TooManyOpenSessions(f"payer {payer_text} has {open_count} open sessions")
        try:
            info = self.rpc.fetch_account_info(payer_text)
        except TransportError as exc:
            raise NodeUnavailable(str(exc)) from exc
        except RpcError as exc:
            raise NodeUnavailable(f"node error: {exc}") from exc
        if info is None:
            raise AccountNotOpened(f"account has no blocks: {payer_text}")

        session_id = _secrets.token_hex(16)
        challenge = derive_challenge_representative(session_id, self.secret)
        # Astronomically unlikely, but the invariant is cheap to keep.
        bump = 0
        while challenge in (payer_text, self.deposit_account):
            bump += 1
            challenge = derive_challenge_representative(f"{session_id}:{bump}", self.secret)
        session = Session(
            id=session_id,
            payer=payer_text,
            state="awaiting_ownership",
            challenge_representative=challenge,
            frontier_height_at_creation=info.block_count,
            price=self.price,
            deposit_account=self.deposit_account,
            created_at=now,
            expires_at=now + self.session_ttl,
        )
        with self._registry_lock:
            self._sessions[session_id] = session
            self._session_locks[session_id] = threading.Lock()
        self._on_event("created", session)
        return session

    def _check_deadline(self, session: Session, now: int) -> None:
        # Deadline is exclusive: the session dies AT expires_at.
        if now >= session.expires_at:
            if session.state in ("awaiting_ownership", "awaiting_payment"):
                session.state = "expired"
                self._on_event("expired", session)
            raise SessionExpired(f"session {session.id} expired at {session.expires_at}")

    def verify_ownership(self, session_id: str, now: int) -> Session:
        with self._lock_for(session_id):
            session = self.get_session(session_id)
            if session.state == "expired":
                raise SessionExpired(f"session {session_id} is expired")
            if session.state != "awaiting_ownership":
                raise WrongState(f"session is {session.state}")
            self._check_deadline(session, now)
            try:
                info = self.rpc.fetch_account_info(session.payer)
            except TransportError as exc:
                raise NodeUnavailable(str(exc)) from exc
            except RpcError as exc:
                raise NodeUnavailable(f"node error: {exc}") from exc
            if info is None:
                raise NodeUnavailable("payer account vanished from node view")
            if info.representative != session.challenge_representative:
                raise RepresentativeMismatch(info.representative)
            session.state = "awaiting_payment"
            self._on_event("ownership_verified", session)
            return session

    def payment_spec(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        if session.state != "awaiting_payment":
            raise WrongState(f"session is {session.state}")
        return {
            "deposit_account": session.deposit_account,
            "amount_raw": str(session.price),
            "payment_uri": f"nano:{session.deposit_account}?amount={session.price}",
            "pay_by": session.expires_at,
        }

    def verify_payment(self, session_id: str, now: int) -> Session:
        with self._lock_for(session_id):
            session = self.get_session(session_id)
            if session.state == "expired":
                raise SessionExpired(f"session {session_id} is expired")
            if session.state != "awaiting_payment":
                raise WrongState(f"session is {session.state}")
            self._check_deadline(session, now)

            best_underpaid: RawAmount | None = None
            saw_unconfirmed = False
            head: str | None = None
            done = False
            for _ in range(MAX_HISTORY_PAGES):
                try:
                    entries, head = self.rpc.fetch_history(
                        session.payer, HISTORY_PAGE_SIZE, head)
                except TransportError as exc:
                    raise NodeUnavailable(str(exc)) from exc
                except RpcError as exc:
                    raise NodeUnavailable(f"node error: {exc}") from exc
                for entry in entries:
                    # Newest-first: once heights fall to the creation-time
                    # snapshot, nothing older can qualify.
                    if entry.height <= session.frontier_height_at_creation:
                        done = True
                        break
                    if entry.kind != "send" or entry.counterparty != session.deposit_account:
                        continue
                    if entry.amount < session.price:
                        if best_underpaid is None or entry.amount > best_underpaid:
                            best_underpaid = entry.amount
                        continue
                    if self.require_confirmation and not entry.confirmed:
                        saw_unconfirmed = True
                        continue
                    if entry.hash in self.store:
                        continue
                    try:
                        won = self.store.consume(entry.hash)
                    except StorageFailure:
                        raise  # refuse to grant rather than risk a double-grant
                    if not won:
                        continue  # raced by another session; keep scanning
                    session.consumed_send_hash = entry.hash
                    session.state = "granted"
                    session.token = tokens.issue_token(
                        self.secret, session.id, session.payer, now, now + self.token_ttl)
                    session.token_expires_at = now + self.token_ttl
                    self._on_event("granted", session)
                    return session
                if done or head is None:
                    break

            if saw_unconfirmed:
                raise UnconfirmedPayment("a sufficient send exists but is not yet confirmed")
            if best_underpaid is not None:
                raise Underpaid(best_underpaid)
            raise PaymentNotFound("no qualifying send to the deposit account")

    def verify_token(self, token_text: str, now: int) -> dict:
        return tokens.verify_token(self.secret, token_text, now)

    def expire_sessions(self, now: int) -> int:
        expired = 0
        for session in self.sessions():
            if session.state in ("awaiting_ownership", "awaiting_payment") \
                    and now >= session.expires_at:
                with self._lock_for(session.id):
                    if session.state in ("awaiting_ownership", "awaiting_payment"):
                        session.state = "expired"
                        self._on_event("expired", session)
                        expired += 1
        return expired
