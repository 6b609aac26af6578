"""Capability tokens: signed bindings of tenant -> application -> bus.

A token is issued once per application registration and must accompany
every publish and consume call. Verification is stateless: the signature
is an HMAC-SHA256 over the token's canonical byte form under the fabric
secret, so authenticity can be checked without a registry lookup.

Canonical form (the exact signed bytes): UTF-8 encoding of

    token_id LF tenant_id LF app_id LF bus_id LF issued_at

with ``issued_at`` rendered as a decimal integer. Wire encoding is
``base64url(canonical) LF base64url(signature)``. Identifiers cannot
contain LF (see ``validate_identifier``), so the form is unambiguous.
"""

from __future__ import annotations

import base64
import dataclasses
import hashlib
import hmac
import re
import uuid
from dataclasses import dataclass

from .clock import Clock, SystemClock
from .errors import InvalidIdentifier, InvalidToken

SIGNATURE_BYTES = 32

_IDENTIFIER_RE = re.compile(r"^[a-z0-9_-]{1,64}$")


def validate_identifier(value: str, what: str = "identifier") -> str:
    """Check a tenant/app/bus id: 1-64 chars of [a-z0-9_-]."""
    if not isinstance(value, str) or not _IDENTIFIER_RE.match(value):
        raise InvalidIdentifier(f"{what} must be 1-64 chars of [a-z0-9_-], got {value!r}")
    return value


def _b64_decode_strict(part: str) -> bytes:
    """base64url decode that only accepts the canonical encoding.

    Python's decoder ignores stray trailing bits and tolerates the
    standard alphabet, so two different strings can decode to the same
    bytes. Tokens must not have aliases: anything that does not re-encode
    to the exact input is rejected.
    """
    decoded = base64.urlsafe_b64decode(part.encode("ascii"))
    if base64.urlsafe_b64encode(decoded).decode("ascii") != part:
        raise ValueError("non-canonical base64url")
    return decoded


@dataclass(frozen=True, slots=True)
class Token:
    token_id: str
    tenant_id: str
    app_id: str
    bus_id: str
    issued_at: int
    signature: bytes

    def canonical_bytes(self) -> bytes:
        return "\n".join(
            (self.token_id, self.tenant_id, self.app_id, self.bus_id, str(self.issued_at))
        ).encode("utf-8")

    def to_wire(self) -> str:
        return (
            base64.urlsafe_b64encode(self.canonical_bytes()).decode("ascii")
            + "\n"
            + base64.urlsafe_b64encode(self.signature).decode("ascii")
        )

    @classmethod
    def from_wire(cls, wire: str) -> Token:
        try:
            canonical_b64, signature_b64 = wire.split("\n")
            canonical = _b64_decode_strict(canonical_b64)
            signature = _b64_decode_strict(signature_b64)
            token_id, tenant_id, app_id, bus_id, issued_at = canonical.decode("utf-8").split("\n")
            return cls(token_id, tenant_id, app_id, bus_id, int(issued_at), signature)
        except (ValueError, UnicodeDecodeError) as exc:
            raise InvalidToken(f"malformed token wire encoding: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "token_id": self.token_id,
            "tenant_id": self.tenant_id,
            "app_id": self.app_id,
            "bus_id": self.bus_id,
            "issued_at": self.issued_at,
            "wire": self.to_wire(),
        }


def sign(canonical: bytes, secret: bytes) -> bytes:
    return hmac.new(secret, canonical, hashlib.sha256).digest()


def issue_token(
    tenant_id: str,
    app_id: str,
    bus_id: str,
    *,
    secret: bytes,
    clock: Clock | None = None,
) -> Token:
    """Mint a fresh token. Inputs are assumed pre-validated by the fabric."""
    clock = clock or SystemClock()
    unsigned = Token(
        token_id=str(uuid.uuid4()),
        tenant_id=tenant_id,
        app_id=app_id,
        bus_id=bus_id,
        issued_at=clock.now_ms() // 1000,
        signature=b"",
    )
    return dataclasses.replace(unsigned, signature=sign(unsigned.canonical_bytes(), secret))


def verify_token(token: Token, secret: bytes) -> bool:
    """True iff the signature equals the MAC of the canonical form, byte for byte.

    Never raises: any malformation (wrong signature length, non-string
    fields, undecodable content) verifies as False.
    """
    try:
        if not isinstance(token.signature, (bytes, bytearray)):
            return False
        if len(token.signature) != SIGNATURE_BYTES:
            return False
        expected = sign(token.canonical_bytes(), secret)
        return hmac.compare_digest(expected, bytes(token.signature))
    except Exception:
        return False
