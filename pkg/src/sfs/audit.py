"""Append-only audit trail.

One event per line in a local text file, fixed field order::

    timestamp | principal | operation | target | outcome | detail

Timestamps are ISO-8601 UTC and never decrease within a log (recording
clamps to the latest seen instant if the clock steps backwards).  Lines
are appended under a lock so concurrent handlers never interleave, and
the file is only ever opened for append.  Storage failures raise
:class:`AuditStorageError` for the caller to surface; the serving path
catches it and falls back to stderr rather than dropping the request.
"""
from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from .errors import FormatError, SfsError

_SEPARATOR = " | "


class AuditStorageError(SfsError):
    """The audit log could not be appended to."""


class AuditFormatError(FormatError):
    """A log line does not follow the six-field format."""


class Operation(enum.Enum):
    LOGIN = "login"
    LOGOUT = "logout"
    LIST = "list"
    DOWNLOAD = "download"
    UPLOAD = "upload"
    DELETE_FILE = "delete_file"
    ACL_CHANGE = "acl_change"
    USER_ADD = "user_add"
    USER_DELETE = "user_delete"
    USER_MODIFY = "user_modify"
    GROUP_CHANGE = "group_change"
    CERT_BIND = "cert_bind"
    CERT_UNBIND = "cert_unbind"
    CERT_REVOKE = "cert_revoke"


class Outcome(enum.Enum):
    SUCCESS = "success"
    DENIED = "denied"
    ERROR = "error"


@dataclass(frozen=True)
class AuditEvent:
    timestamp: datetime
    principal: str
    operation: Operation
    target: str
    outcome: Outcome
    detail: str

    def __post_init__(self) -> None:
        if self.timestamp.tzinfo is None:
            raise ValueError("timestamp must be timezone-aware")
        if not self.principal:
            raise ValueError("principal must be non-empty (use 'anonymous')")


def make_event(
    principal: str,
    operation: Operation,
    target: str = "",
    outcome: Outcome = Outcome.SUCCESS,
    detail: str = "",
    timestamp: datetime | None = None,
) -> AuditEvent:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).replace(microsecond=0)
    return AuditEvent(
        timestamp=timestamp,
        principal=principal,
        operation=operation,
        target=target,
        outcome=outcome,
        detail=detail,
    )


def _clean(value: str, *, is_detail: bool = False) -> str:
    # Keep each event on one parseable line: no newlines anywhere, and no
    # bare pipes in the fields before detail (detail is the maxsplit tail).
    value = value.replace("\r", " ").replace("\n", " ")
    if not is_detail:
        value = value.replace("|", "/")
    return value


def format_line(event: AuditEvent) -> str:
    ts = event.timestamp.astimezone(timezone.utc).replace(microsecond=0).isoformat()
    return _SEPARATOR.join(
        [
            ts,
            _clean(event.principal),
            event.operation.value,
            _clean(event.target),
            event.outcome.value,
            _clean(event.detail, is_detail=True),
        ]
    )


def parse_line(line: str) -> AuditEvent:
    parts = line.split(_SEPARATOR, 5)
    if len(parts) != 6:
        raise AuditFormatError(f"expected 6 ' | '-separated fields, got {len(parts)}")
    ts_text, principal, op_text, target, outcome_text, detail = parts
    try:
        timestamp = datetime.fromisoformat(ts_text)
    except ValueError as exc:
        raise AuditFormatError(f"bad timestamp {ts_text!r}") from exc
    if timestamp.tzinfo is None:
        raise AuditFormatError(f"timestamp {ts_text!r} is not timezone-aware")
    try:
        operation = Operation(op_text)
    except ValueError as exc:
        raise AuditFormatError(f"unknown operation {op_text!r}") from exc
    try:
        outcome = Outcome(outcome_text)
    except ValueError as exc:
        raise AuditFormatError(f"unknown outcome {outcome_text!r}") from exc
    return AuditEvent(
        timestamp=timestamp,
        principal=principal,
        operation=operation,
        target=target,
        outcome=outcome,
        detail=detail,
    )


class AuditLog:
    """File-backed audit log.  Appends are serialized; reads scan the file."""

    def __init__(self, path: str | Path) -> None:
        self._path = Path(path)
        self._lock = threading.Lock()
        self._last_timestamp: datetime | None = None
        if self._path.exists():
            events = self.events()
            if events:
                self._last_timestamp = events[-1].timestamp

    @property
    def path(self) -> Path:
        return self._path

    def record(self, event: AuditEvent) -> AuditEvent:
        """Append the event; returns it as written (timestamp may be clamped
        forward to keep the log non-decreasing)."""
        with self._lock:
            ts = event.timestamp.astimezone(timezone.utc).replace(microsecond=0)
            if self._last_timestamp is not None and ts < self._last_timestamp:
                ts = self._last_timestamp
            event = replace(event, timestamp=ts)
            line = format_line(event)
            try:
                self._path.parent.mkdir(parents=True, exist_ok=True)
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
                    fh.flush()
            except OSError as exc:
                raise AuditStorageError(f"cannot append to {self._path}: {exc}") from exc
            self._last_timestamp = ts
        return event

    def events(self) -> list[AuditEvent]:
        """Every event in the log, in file (= chronological) order."""
        try:
            text = self._path.read_text(encoding="utf-8")
        except FileNotFoundError:
            return []
        except OSError as exc:
            raise AuditStorageError(f"cannot read {self._path}: {exc}") from exc
        out = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                out.append(parse_line(line))
            except AuditFormatError as exc:
                raise AuditFormatError(f"{self._path}:{lineno}: {exc}") from exc
        return out

    def query(
        self,
        principal: str | None = None,
        operation: Operation | None = None,
        since: datetime | None = None,
        until: datetime | None = None,
    ) -> list[AuditEvent]:
        """Events matching every given filter, in chronological order."""
        out = []
        for event in self.events():
            if principal is not None and event.principal != principal:
                continue
            if operation is not None and event.operation is not operation:
                continue
            if since is not None and event.timestamp < since:
                continue
            if until is not None and event.timestamp > until:
                continue
            out.append(event)
        return out
