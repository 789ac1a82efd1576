"""User credential directory.

Holds one inetOrgPerson-style entry per user: uid, userPassword (an SSHA
string), and an optional userCertificate (DER).  Lookup is exact-match
and case-sensitive on uid.  The on-disk form is a single LDIF file
rewritten atomically on every mutation; ``import_ldif``/``export_ldif``
expose the same format as text for migration to a real LDAP deployment.
"""
from __future__ import annotations

import base64
import os
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

from .credentials import UserCredentials, check_ssha_format
from .errors import ConflictError, FormatError, NotFoundError

_ATTR_UID = "uid"
_ATTR_PASSWORD = "userPassword"
_ATTR_CERTIFICATE = "userCertificate;binary"
_OBJECT_CLASS = "inetOrgPerson"
_LDIF_WRAP = 76


class LdifError(FormatError):
    """Malformed LDIF input; message carries the offending line number."""


@dataclass(frozen=True)
class DirectoryEntry:
    """One directory record: uid, SSHA password hash, optional DER certificate."""

    uid: str
    user_password: str
    user_certificate: bytes | None = None

    def __post_init__(self) -> None:
        if not self.uid:
            raise ValueError("uid must be non-empty")
        check_ssha_format(self.user_password)


def _dn_escape(value: str) -> str:
    # RFC 4514 special characters inside an attribute value.
    out = []
    for i, ch in enumerate(value):
        if ch in ',+"\\<>;=' or (ch == "#" and i == 0):
            out.append("\\" + ch)
        elif ch == " " and i in (0, len(value) - 1):
            out.append("\\ ")
        else:
            out.append(ch)
    return "".join(out)


def _is_safe_string(value: str) -> bool:
    if value == "":
        return True
    if value[0] in (" ", ":", "<"):
        return False
    return all(" " <= ch <= "~" for ch in value) and not value.endswith(" ")


def _wrap(line: str) -> list[str]:
    if len(line) <= _LDIF_WRAP:
        return [line]
    pieces = [line[:_LDIF_WRAP]]
    rest = line[_LDIF_WRAP:]
    # Continuation lines carry a leading space that is not part of the value.
    step = _LDIF_WRAP - 1
    for i in range(0, len(rest), step):
        pieces.append(" " + rest[i : i + step])
    return pieces


def _attr_lines(name: str, value: str | bytes) -> list[str]:
    if isinstance(value, bytes):
        return _wrap(f"{name}:: {base64.b64encode(value).decode('ascii')}")
    if _is_safe_string(value):
        return _wrap(f"{name}: {value}")
    return _wrap(f"{name}:: {base64.b64encode(value.encode('utf-8')).decode('ascii')}")


def format_ldif(entries: list[DirectoryEntry]) -> str:
    """Render entries as LDIF text, one record per entry."""
    blocks = []
    for entry in entries:
        lines = [f"dn: uid={_dn_escape(entry.uid)},ou=people"]
        lines += _attr_lines("objectClass", _OBJECT_CLASS)
        lines += _attr_lines(_ATTR_UID, entry.uid)
        lines += _attr_lines(_ATTR_PASSWORD, entry.user_password)
        if entry.user_certificate is not None:
            lines += _attr_lines(_ATTR_CERTIFICATE, entry.user_certificate)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


def _unfold(text: str) -> list[tuple[int, str]]:
    """Join continuation lines; returns (first line number, logical line)."""
    logical: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith(" "):
            if not logical or logical[-1][1] == "":
                raise LdifError(f"line {lineno}: continuation with nothing to continue")
            start, prev = logical[-1]
            logical[-1] = (start, prev + raw[1:])
        else:
            logical.append((lineno, raw))
    return logical


def parse_ldif(text: str) -> list[DirectoryEntry]:
    """Parse LDIF text into directory entries.

    Accepts an optional ``version:`` header and ``#`` comment lines.
    Each record needs uid and userPassword attributes; the certificate
    attribute is optional.  Raises :class:`LdifError` on malformed input.
    """
    entries: list[DirectoryEntry] = []
    record: dict[str, object] = {}
    record_line = 0

    def flush() -> None:
        nonlocal record
        if not record:
            return
        uid = record.get(_ATTR_UID.lower())
        password = record.get(_ATTR_PASSWORD.lower())
        if not isinstance(uid, str) or not uid:
            raise LdifError(f"line {record_line}: record missing uid attribute")
        if not isinstance(password, str):
            raise LdifError(f"line {record_line}: record missing userPassword attribute")
        certificate = record.get(_ATTR_CERTIFICATE.lower())
        try:
            entry = DirectoryEntry(
                uid=uid,
                user_password=password,
                user_certificate=certificate if isinstance(certificate, bytes) else None,
            )
        except (ValueError, FormatError) as exc:
            raise LdifError(f"line {record_line}: invalid entry: {exc}") from exc
        entries.append(entry)
        record = {}

    for lineno, line in _unfold(text):
        if line == "":
            flush()
            continue
        if line.startswith("#"):
            continue
        if ":" not in line:
            raise LdifError(f"line {lineno}: expected 'attribute: value'")
        name, _, rest = line.partition(":")
        name = name.strip()
        if not record:
            record_line = lineno
        if name.lower() == "version":
            continue
        if rest.startswith(":"):
            b64 = rest[1:].strip()
            try:
                value: str | bytes = base64.b64decode(b64, validate=True)
            except Exception as exc:
                raise LdifError(f"line {lineno}: bad base64 value: {exc}") from exc
            if name.lower() != _ATTR_CERTIFICATE.lower():
                try:
                    value = value.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise LdifError(f"line {lineno}: non-text value for {name}") from exc
        elif rest.startswith("<"):
            raise LdifError(f"line {lineno}: URL-valued attributes are not supported")
        else:
            value = rest[1:] if rest.startswith(" ") else rest
        record[name.lower()] = value
    flush()
    return entries


class Directory:
    """Thread-safe credential directory with optional LDIF file persistence.

    With ``path`` unset the directory is purely in-memory (used by tests);
    otherwise every mutation rewrites the file via write-temp-then-rename
    so readers never observe a partial file.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self._path = Path(path) if path is not None else None
        self._entries: dict[str, DirectoryEntry] = {}
        self._lock = threading.RLock()
        if self._path is not None and self._path.exists():
            self.import_ldif(self._path.read_text(encoding="utf-8"))

    def _persist(self) -> None:
        if self._path is None:
            return
        text = format_ldif([self._entries[uid] for uid in sorted(self._entries)])
        self._path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=str(self._path.parent), prefix=self._path.name + ".")
        try:
            os.write(fd, text.encode("utf-8"))
            os.fchmod(fd, 0o600)
        finally:
            os.close(fd)
        os.replace(tmp, self._path)

    def add_user(self, entry: DirectoryEntry) -> None:
        with self._lock:
            if entry.uid in self._entries:
                raise ConflictError(f"uid {entry.uid!r} already exists")
            self._entries[entry.uid] = entry
            self._persist()

    def delete_user(self, uid: str) -> None:
        with self._lock:
            if uid not in self._entries:
                raise NotFoundError(f"no such uid {uid!r}")
            del self._entries[uid]
            self._persist()

    def get_credentials(self, uid: str) -> UserCredentials:
        with self._lock:
            entry = self._entries.get(uid)
        if entry is None:
            raise NotFoundError(f"no such uid {uid!r}")
        return UserCredentials(
            username=entry.uid,
            password_hash=entry.user_password,
            certificate=entry.user_certificate,
        )

    def set_password(self, uid: str, ssha_hash: str) -> None:
        with self._lock:
            entry = self._entries.get(uid)
            if entry is None:
                raise NotFoundError(f"no such uid {uid!r}")
            self._entries[uid] = DirectoryEntry(
                uid=uid, user_password=ssha_hash, user_certificate=entry.user_certificate
            )
            self._persist()

    def set_certificate(self, uid: str, certificate: bytes | None) -> None:
        with self._lock:
            entry = self._entries.get(uid)
            if entry is None:
                raise NotFoundError(f"no such uid {uid!r}")
            self._entries[uid] = DirectoryEntry(
                uid=uid, user_password=entry.user_password, user_certificate=certificate
            )
            self._persist()

    def list_uids(self) -> list[str]:
        with self._lock:
            return sorted(self._entries)

    def __contains__(self, uid: str) -> bool:
        with self._lock:
            return uid in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def export_ldif(self) -> str:
        with self._lock:
            return format_ldif([self._entries[uid] for uid in sorted(self._entries)])

    def import_ldif(self, text: str) -> None:
        """Replace the directory contents with the parsed entries."""
        parsed = parse_ldif(text)
        entries: dict[str, DirectoryEntry] = {}
        for entry in parsed:
            if entry.uid in entries:
                raise LdifError(f"duplicate uid {entry.uid!r} in LDIF input")
            entries[entry.uid] = entry
        with self._lock:
            self._entries = entries
            self._persist()
