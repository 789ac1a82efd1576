"""Login session table.

Tokens are opaque 256-bit random strings bound to the SHA-256
fingerprint of the client certificate that performed the login;
presenting a token over a connection authenticated with any other
certificate fails validation.  Sessions expire after an idle period and
successful validation refreshes the deadline.
"""
from __future__ import annotations

import hmac
import secrets
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Callable

from ..filestore import Role

DEFAULT_IDLE_SECONDS = 30 * 60


@dataclass(frozen=True)
class Session:
    token: str
    uid: str
    role: Role
    client_cert_fingerprint: str
    created_at: datetime
    expires_at: datetime


class SessionTable:
    """Thread-safe in-memory session store with idle expiry.

    ``clock`` is injectable so expiry is testable without sleeping.
    """

    def __init__(
        self,
        idle_seconds: int = DEFAULT_IDLE_SECONDS,
        clock: Callable[[], datetime] | None = None,
    ) -> None:
        if idle_seconds < 1:
            raise ValueError("idle_seconds must be >= 1")
        self._idle = timedelta(seconds=idle_seconds)
        self._clock = clock or (lambda: datetime.now(timezone.utc))
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, uid: str, role: Role, client_cert_fingerprint: str) -> Session:
        now = self._clock()
        session = Session(
            token=secrets.token_urlsafe(32),
            uid=uid,
            role=role,
            client_cert_fingerprint=client_cert_fingerprint,
            created_at=now,
            expires_at=now + self._idle,
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def validate(self, token: str, client_cert_fingerprint: str) -> Session | None:
        """The live session for ``token``, or None.

        Returns None for unknown tokens, expired sessions (which are
        dropped), and fingerprint mismatches.  A hit refreshes expiry.
        """
        now = self._clock()
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                return None
            if now >= session.expires_at:
                del self._sessions[token]
                return None
            if not hmac.compare_digest(
                session.client_cert_fingerprint, client_cert_fingerprint
            ):
                return None
            session = replace(session, expires_at=now + self._idle)
            self._sessions[token] = session
        return session

    def drop(self, token: str) -> bool:
        with self._lock:
            return self._sessions.pop(token, None) is not None

    def purge_expired(self) -> int:
        now = self._clock()
        with self._lock:
            dead = [t for t, s in self._sessions.items() if now >= s.expires_at]
            for token in dead:
                del self._sessions[token]
        return len(dead)

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)
