"""Signed bearer tokens: base64url(payload) "." base64url(HMAC-SHA256 tag).

The tag is computed over the exact payload bytes with the gate secret.
Expiry is exclusive: a token is valid strictly before expires_at.
"""

from __future__ import annotations

import base64
import hmac
import json


class TokenInvalid(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason  # "malformed" | "bad_signature" | "expired"


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode()


def _unb64(text: str) -> bytes:
    return base64.urlsafe_b64decode(text + "=" * (-len(text) % 4))


def issue_token(secret: bytes, session_id: str, payer: str,
                issued_at: int, expires_at: int) -> str:
    payload = json.dumps({
        "session_id": session_id,
        "payer": payer,
        "issued_at": issued_at,
        "expires_at": expires_at,
    }, separators=(",", ":")).encode()
    tag = hmac.new(secret, payload, "sha256").digest()
    return _b64(payload) + "." + _b64(tag)


def verify_token(secret: bytes, token_text: str, now: int) -> dict:
    """Returns the payload dict, or raises TokenInvalid with a stable reason."""
    parts = token_text.split(".")
    if len(parts) != 2:
        raise TokenInvalid("malformed")
    try:
        payload_bytes = _unb64(parts[0])
        tag = _unb64(parts[1])
    except (ValueError, UnicodeDecodeError):
        raise TokenInvalid("malformed") from None
    # Require canonical encoding: base64 decoders drop unused trailing bits,
    # so without this check two distinct texts could verify as the same token.
    if _b64(payload_bytes) != parts[0] or _b64(tag) != parts[1]:
        raise TokenInvalid("malformed")
    expected = hmac.new(secret, payload_bytes, "sha256").digest()
    if not hmac.compare_digest(tag, expected):
        raise TokenInvalid("bad_signature")
    try:
        payload = json.loads(payload_bytes)
    except ValueError:
        raise TokenInvalid("malformed") from None
    if not isinstance(payload, dict) or not isinstance(payload.get("expires_at"), int):
        raise TokenInvalid("malformed")
    if now >= payload["expires_at"]:
        raise TokenInvalid("expired")
    return payload
