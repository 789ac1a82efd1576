"""Salted-SHA1 password hashing and credential matching.

Hashes use the LDAP ``{SSHA}`` scheme: ``{SSHA}`` + base64(SHA1(password ++
salt) ++ salt).  SHA-1 is cryptographically weak; it is kept deliberately
because ``{SSHA}`` wire compatibility with LDAP ``userPassword`` values is
a goal of this service.  Do not reuse this scheme elsewhere.
"""
from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import secrets
from dataclasses import dataclass

from .errors import FormatError

SSHA_PREFIX = "{SSHA}"

_DIGEST_LEN = 20          # SHA-1
_GENERATED_SALT_LEN = 8   # what we create
_MIN_SALT_LEN = 4         # what we accept (interop with 4-byte-salt tools)
_MAX_SALT_LEN = 16


class SshaFormatError(FormatError):
    """The value is not a well-formed ``{SSHA}`` hash."""


def _decode_payload(tagged: str) -> bytes:
    """Base64 payload of a tagged hash: 20-byte digest followed by the salt."""
    if not tagged.startswith(SSHA_PREFIX):
        raise SshaFormatError(f"missing {SSHA_PREFIX} prefix")
    try:
        payload = base64.b64decode(tagged[len(SSHA_PREFIX):].encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise SshaFormatError(f"invalid base64 payload: {exc}") from exc
    if len(payload) < _DIGEST_LEN + _MIN_SALT_LEN:
        raise SshaFormatError(
            f"payload too short: {len(payload)} bytes, need >= {_DIGEST_LEN + _MIN_SALT_LEN}"
        )
    return payload


def check_ssha_format(tagged: str) -> None:
    """Raise :class:`SshaFormatError` unless ``tagged`` is a valid SSHA string."""
    _decode_payload(tagged)


def ssha_hash(password: str, salt: bytes) -> str:
    """Hash ``password`` with an explicit salt of 4..16 bytes."""
    if not _MIN_SALT_LEN <= len(salt) <= _MAX_SALT_LEN:
        raise ValueError(
            f"salt must be {_MIN_SALT_LEN}..{_MAX_SALT_LEN} bytes, got {len(salt)}"
        )
    digest = hashlib.sha1(password.encode("utf-8") + salt).digest()
    return SSHA_PREFIX + base64.b64encode(digest + salt).decode("ascii")


def ssha_verify(password: str, tagged: str) -> bool:
    """True iff ``password`` matches the tagged hash.

    Accepts any salt length >= 4 regardless of what :func:`ssha_hash`
    generates.  Malformed input raises :class:`SshaFormatError`, which is
    distinct from a mismatch.
    """
    payload = _decode_payload(tagged)
    digest, salt = payload[:_DIGEST_LEN], payload[_DIGEST_LEN:]
    computed = hashlib.sha1(password.encode("utf-8") + salt).digest()
    # Constant-time on the digest to avoid timing side channels.
    return hmac.compare_digest(digest, computed)


@dataclass
class UserCredentials:
    """A user name, an SSHA password hash, and an optional certificate (DER)."""

    username: str
    password_hash: str
    certificate: bytes | None = None

    def __post_init__(self) -> None:
        if not self.username:
            raise ValueError("username must be non-empty")
        check_ssha_format(self.password_hash)


def make_credentials(username: str, plaintext: str, certificate: bytes | None = None) -> UserCredentials:
    """Build credentials with a fresh random salt."""
    if not username:
        raise ValueError("username must be non-empty")
    salt = secrets.token_bytes(_GENERATED_SALT_LEN)
    return UserCredentials(
        username=username,
        password_hash=ssha_hash(plaintext, salt),
        certificate=certificate,
    )


def credentials_match(
    username: str,
    password: str,
    certificate: bytes | None,
    stored: UserCredentials,
) -> bool:
    """Compare supplied credentials against a stored set.

    True iff the usernames are equal, the password verifies against the
    stored hash, and -- when a certificate is stored -- the supplied
    certificate is present and byte-equal in DER form.  A mismatch is
    False, never an error.
    """
    if username != stored.username:
        return False
    try:
        if not ssha_verify(password, stored.password_hash):
            return False
    except SshaFormatError:
        return False
    if stored.certificate is None:
        return True
    return certificate is not None and hmac.compare_digest(certificate, stored.certificate)
