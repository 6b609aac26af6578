import base64
import random

import pytest
from hypothesis import given, strategies as st

from csb.clock import VirtualClock
from csb.errors import InvalidIdentifier, InvalidToken
from csb.tokens import (
    SIGNATURE_BYTES,
    Token,
    issue_token,
    sign,
    validate_identifier,
    verify_token,
)

SECRET = b"0123456789abcdef0123456789abcdef"

IDENT = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_-", min_size=1, max_size=64)


def test_canonical_bytes_frozen():
    # The signed byte sequence is part of the contract; pin it exactly.
    token = Token("tid-1", "acme", "bank", "b0", 1700000000, b"")
    assert token.canonical_bytes() == b"tid-1\nacme\nbank\nb0\n1700000000"


def test_signature_is_hmac_sha256_of_canonical():
    import hashlib
    import hmac as hmac_mod

    token = issue_token("acme", "bank", "b0", secret=SECRET, clock=VirtualClock(5_000))
    expected = hmac_mod.new(SECRET, token.canonical_bytes(), hashlib.sha256).digest()
    assert token.signature == expected
    assert len(token.signature) == SIGNATURE_BYTES


def test_issued_at_is_clock_seconds():
    token = issue_token("acme", "bank", "b0", secret=SECRET, clock=VirtualClock(7_999))
    assert token.issued_at == 7  # ms // 1000


def test_wire_round_trip():
    token = issue_token("acme", "bank", "b1", secret=SECRET)
    assert Token.from_wire(token.to_wire()) == token


def test_wire_is_two_base64url_lines():
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    first, second = token.to_wire().split("\n")
    assert base64.urlsafe_b64decode(first) == token.canonical_bytes()
    assert base64.urlsafe_b64decode(second) == token.signature


def test_verify_accepts_valid_token():
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    assert verify_token(token, SECRET)


def test_verify_rejects_wrong_secret():
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    assert not verify_token(token, b"x" * 32)


def test_verify_rejects_field_change():
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    import dataclasses

    for change in (
        {"tenant_id": "evil"},
        {"app_id": "other"},
        {"bus_id": "b1"},
        {"issued_at": token.issued_at + 1},
        {"signature": bytes(32)},
        {"signature": token.signature[:-1]},
    ):
        assert not verify_token(dataclasses.replace(token, **change), SECRET)


def test_verify_never_raises_on_garbage():
    assert not verify_token(Token("a", "b", "c", "d", 0, None), SECRET)  # type: ignore[arg-type]
    assert not verify_token(Token("a", None, "c", "d", 0, b"x" * 32), SECRET)  # type: ignore[arg-type]


@pytest.mark.parametrize(
    "wire",
    [
        "",
        "onlyoneline",
        "a\nb\nc",
        "!!notb64!!\nAAAA",
        "AAAA\n!!notb64!!",
        "AA\nAAAA",  # bad length for the b64 quantum
    ],
)
def test_from_wire_rejects_malformed(wire):
    with pytest.raises(InvalidToken):
        Token.from_wire(wire)


def test_from_wire_rejects_base64_aliases():
    # Same decoded bytes, different string: must not round-trip.
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    first, second = token.to_wire().split("\n")
    aliased = first.replace("-", "+").replace("_", "/")
    if aliased != first:
        with pytest.raises(InvalidToken):
            Token.from_wire(aliased + "\n" + second)
    # flip ignored trailing bits in the final quantum
    if first.endswith("="):
        body = first.rstrip("=")
        alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"
        last = body[-1]
        twiddled = alphabet[(alphabet.index(last) + 1) % 64]
        mutated = body[:-1] + twiddled + "=" * (len(first) - len(body))
        with pytest.raises(InvalidToken):
            Token.from_wire(mutated + "\n" + second)


def test_single_byte_mutations_all_rejected():
    token = issue_token("acme", "bank", "b0", secret=SECRET, clock=VirtualClock(1_700_000_000_000))
    raw = token.to_wire().encode("utf-8")
    rng = random.Random(1234)
    for _ in range(1000):
        i = rng.randrange(len(raw))
        b = rng.randrange(256)
        while b == raw[i]:
            b = rng.randrange(256)
        mutated = raw[:i] + bytes([b]) + raw[i + 1 :]
        try:
            candidate = Token.from_wire(mutated.decode("utf-8"))
        except (InvalidToken, UnicodeDecodeError):
            continue
        assert not verify_token(candidate, SECRET), f"mutation at byte {i} accepted"


@given(tenant=IDENT, app=IDENT, bus=IDENT, issued=st.integers(min_value=0, max_value=2**40))
def test_round_trip_verifies_property(tenant, app, bus, issued):
    token = Token("tid", tenant, app, bus, issued, b"")
    import dataclasses

    signed = dataclasses.replace(token, signature=sign(token.canonical_bytes(), SECRET))
    again = Token.from_wire(signed.to_wire())
    assert again == signed
    assert verify_token(again, SECRET)


@pytest.mark.parametrize("bad", ["", "UPPER", "has space", "a" * 65, "täß", "new\nline", None, 7])
def test_validate_identifier_rejects(bad):
    with pytest.raises(InvalidIdentifier):
        validate_identifier(bad, "tenant_id")


@pytest.mark.parametrize("good", ["a", "z9", "snake_case", "kebab-case", "a" * 64])
def test_validate_identifier_accepts(good):
    assert validate_identifier(good) == good


def test_to_dict_includes_wire():
    token = issue_token("acme", "bank", "b0", secret=SECRET)
    doc = token.to_dict()
    assert doc["wire"] == token.to_wire()
    assert doc["tenant_id"] == "acme"
    assert "signature" not in doc  # the raw MAC stays server-side
