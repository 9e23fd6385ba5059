"""Nano address and amount codec.

Addresses are "nano_" + 60 chars of Nano base32 (52 chars encoding the
260-bit zero-padded public key, 8 chars encoding a 40-bit checksum).
The checksum is the 5-byte BLAKE2b digest of the public key, byte-reversed.
Amounts are counts of raw (1 XNO = 10**30 raw) carried as unsigned 128-bit
integers; all arithmetic is range-checked, never wrapping.

These canonical text forms (nano_… addresses, decimal raw strings, 64-char
uppercase hex hashes) are the only serialization used on the wire and on disk.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

ALPHABET = "13456789abcdefghijkmnopqrstuwxyz"
_CHAR_VALUE = {c: i for i, c in enumerate(ALPHABET)}

RAW_PER_XNO = 10**30
MAX_RAW = 2**128 - 1

_HASH_RE = re.compile(r"^[0-9A-F]{64}$")


class CodecError(ValueError):
    """Base for all codec failures; `reason` is a stable machine-readable code."""

    reason = "codec_error"


class InvalidPrefix(CodecError):
    reason = "invalid_prefix"


class InvalidLength(CodecError):
    reason = "invalid_length"


class InvalidCharacter(CodecError):
    reason = "invalid_character"


class ChecksumMismatch(CodecError):
    reason = "checksum_mismatch"


class AmountError(CodecError):
    reason = "malformed"


class AmountOverflow(AmountError):
    reason = "overflow"


class AmountUnderflow(AmountError):
    reason = "underflow"


class TooManyFractionDigits(AmountError):
    reason = "too_many_fraction_digits"


def _b32_encode(value: int, nchars: int) -> str:
    return "".join(ALPHABET[(value >> (5 * (nchars - 1 - i))) & 31] for i in range(nchars))


def _b32_decode(text: str) -> int:
    value = 0
    for ch in text:
        try:
            value = (value << 5) | _CHAR_VALUE[ch]
        except KeyError:
            raise InvalidCharacter(f"character {ch!r} not in Nano base32 alphabet") from None
    return value


def _checksum(public_key: bytes) -> bytes:
    return hashlib.blake2b(public_key, digest_size=5).digest()[::-1]


def encode_address(public_key: bytes) -> str:
    """Encode a 32-byte public key as canonical "nano_…" text."""
    if len(public_key) != 32:
        raise InvalidLength(f"public key must be 32 bytes, got {len(public_key)}")
    body = _b32_encode(int.from_bytes(public_key, "big"), 52)
    check = _b32_encode(int.from_bytes(_checksum(public_key), "big"), 8)
    return "nano_" + body + check


def decode_address(text: str) -> bytes:
    """Decode address text to the embedded 32-byte public key.

    Accepts the legacy "xrb_" prefix. Raises a distinct CodecError subclass
    for each failure mode so callers can report precisely why.
    """
    if text.startswith("nano_"):
        rest = text[5:]
    elif text.startswith("xrb_"):
        rest = text[4:]
    else:
        raise InvalidPrefix("address must start with 'nano_' or 'xrb_'")
    if len(rest) != 60:
        raise InvalidLength(f"expected 60 characters after prefix, got {len(rest)}")
    body = _b32_decode(rest[:52])
    check = _b32_decode(rest[52:])
    # 52 chars carry 260 bits; the top 4 are zero padding in a valid encoding.
    if body >> 256:
        raise ChecksumMismatch("nonzero padding bits in key segment")
    public_key = (body & ((1 << 256) - 1)).to_bytes(32, "big")
    if check.to_bytes(5, "big") != _checksum(public_key):
        raise ChecksumMismatch("address checksum does not match public key")
    return public_key


def is_valid_address(text: str) -> bool:
    try:
        decode_address(text)
        return True
    except CodecError:
        return False


def parse_block_hash(text: str) -> str:
    """Validate and normalize a block hash: exactly 64 hex chars, uppercased."""
    if not isinstance(text, str) or len(text) != 64:
        raise InvalidLength("block hash must be exactly 64 hex characters")
    upper = text.upper()
    if not _HASH_RE.match(upper):
        raise InvalidCharacter("block hash must be hexadecimal")
    return upper


@dataclass(frozen=True, order=True)
class RawAmount:
    """Unsigned 128-bit count of raw. Arithmetic errors out instead of wrapping."""

    value: int

    def __post_init__(self):
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise AmountError("raw amount must be an integer")
        if self.value < 0:
            raise AmountUnderflow("raw amount cannot be negative")
        if self.value > MAX_RAW:
            raise AmountOverflow("raw amount exceeds 2^128 - 1")

    def __add__(self, other: "RawAmount") -> "RawAmount":
        total = self.value + other.value
        if total > MAX_RAW:
            raise AmountOverflow("raw addition overflows 128 bits")
        return RawAmount(total)

    def __sub__(self, other: "RawAmount") -> "RawAmount":
        if other.value > self.value:
            raise AmountUnderflow("raw subtraction underflows zero")
        return RawAmount(self.value - other.value)

    def __str__(self) -> str:
        return str(self.value)

    @classmethod
    def parse(cls, text: str) -> "RawAmount":
        """Parse a canonical decimal raw string (no sign, no leading zeros)."""
        if not text.isdigit():
            raise AmountError(f"not a decimal raw amount: {text!r}")
        if len(text) > 1 and text[0] == "0":
            raise AmountError(f"leading zeros not allowed: {text!r}")
        return cls(int(text))

    @classmethod
    def from_xno(cls, text: str) -> "RawAmount":
        """Convert a decimal XNO string ("1", "0.25", ".5") to raw, exactly."""
        m = re.fullmatch(r"(\d*)(?:\.(\d*))?", text.strip())
        if not m or (not m.group(1) and not m.group(2)):
            raise AmountError(f"malformed XNO amount: {text!r}")
        whole = int(m.group(1) or "0")
        frac = m.group(2) or ""
        if len(frac) > 30:
            raise TooManyFractionDigits("XNO amounts resolve to at most 30 fraction digits")
        raw = whole * RAW_PER_XNO + int(frac.ljust(30, "0") or "0")
        if raw > MAX_RAW:
            raise AmountOverflow("amount exceeds 2^128 - 1 raw")
        return cls(raw)

    def to_xno(self) -> str:
        """Exact decimal XNO rendering, trailing zeros trimmed."""
        whole, frac = divmod(self.value, RAW_PER_XNO)
        if frac == 0:
            return str(whole)
        return f"{whole}.{str(frac).rjust(30, '0').rstrip('0')}"


ZERO_RAW = RawAmount(0)


def raw_from_xno_decimal(text: str) -> RawAmount:
    return RawAmount.from_xno(text)
