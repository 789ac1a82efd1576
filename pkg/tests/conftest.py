"""Shared test infrastructure.

Two levels of harness:

* :class:`AppHarness` runs the application in-process over ASGI with a
  middleware standing in for the TLS layer, so any certificate bytes can
  be presented, including ones that could never survive a real handshake.
* :class:`LiveDeployment` runs a real uvicorn listener on a loopback
  socket with mandatory client certificates, for everything that must be
  observed at the TLS level.
"""
from __future__ import annotations

import socket
import ssl
import threading
import time
import warnings
from datetime import datetime, timedelta, timezone
from pathlib import Path

import httpx
import pytest
import uvicorn

warnings.filterwarnings("ignore", category=DeprecationWarning)

from fastapi.testclient import TestClient  # noqa: E402

from sfs.audit import AuditLog  # noqa: E402
from sfs.ca import (  # noqa: E402
    CaDirectory,
    CertKind,
    IssuedCertificate,
    encode_certificate,
    encode_private_key,
    issue_certificate,
    revoke_certificate,
)
from sfs.credentials import make_credentials  # noqa: E402
from sfs.directory import Directory, DirectoryEntry  # noqa: E402
from sfs.filestore import Filestore, Role  # noqa: E402
from sfs.server.app import AppState, CrlCache, create_app  # noqa: E402
from sfs.server.sessions import SessionTable  # noqa: E402
from sfs.server.tls import StaticClientCertMiddleware, uvicorn_tls_kwargs  # noqa: E402


class FakeClock:
    """Controllable UTC clock so expiry tests need no real waiting."""

    def __init__(self) -> None:
        self._now = datetime.now(timezone.utc)

    def now(self) -> datetime:
        return self._now

    def advance(self, seconds: float) -> None:
        self._now += timedelta(seconds=seconds)


def write_identity(path: Path, issued: IssuedCertificate) -> Path:
    """Combined certificate + key PEM, the same layout ``ca issue --out`` writes."""
    path.write_bytes(
        encode_certificate(issued.certificate, "PEM") + encode_private_key(issued.private_key)
    )
    return path


def client_tls_context(root_cert: Path, identity: Path | None = None) -> ssl.SSLContext:
    """Client-side TLS context trusting ``root_cert``; httpx needs a real
    SSLContext because its string-path ``verify`` form ignores ``cert``."""
    ctx = ssl.create_default_context(cafile=str(root_cert))
    if identity is not None:
        ctx.load_cert_chain(str(identity))
    return ctx


class AppHarness:
    """In-process application over a fresh on-disk CA."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.ca_dir = CaDirectory(root / "ca")
        self.ca = self.ca_dir.initialize("Harness Root", 3650)
        self.clock = FakeClock()
        self.audit_path = root / "audit.log"
        self.directory = Directory(root / "users.ldif")
        self.filestore = Filestore()
        self.state = AppState(
            directory=self.directory,
            filestore=self.filestore,
            audit_log=AuditLog(self.audit_path),
            sessions=SessionTable(clock=self.clock.now),
            root_certificate=self.ca.root_certificate,
            crl_cache=CrlCache(self.ca_dir.crl_path),
        )
        self.app = create_app(self.state)

    def issue_client(self, cn: str, days: int = 30) -> IssuedCertificate:
        issued = issue_certificate(self.ca, cn, CertKind.CLIENT, days)
        self.ca_dir.save(self.ca)
        return issued

    def issue_server(self, cn: str = "127.0.0.1", days: int = 30) -> IssuedCertificate:
        issued = issue_certificate(self.ca, cn, CertKind.SERVER, days)
        self.ca_dir.save(self.ca)
        return issued

    def revoke(self, serial: int) -> None:
        revoke_certificate(self.ca, serial)
        self.ca_dir.save(self.ca)

    def add_user(
        self,
        uid: str,
        password: str,
        role: Role = Role.NORMAL,
        certificate: bytes | None = None,
    ) -> None:
        creds = make_credentials(uid, password)
        self.directory.add_user(
            DirectoryEntry(
                uid=uid, user_password=creds.password_hash, user_certificate=certificate
            )
        )
        self.filestore.create_user(uid, role)

    def client(self, der: bytes | None = None) -> TestClient:
        return TestClient(
            StaticClientCertMiddleware(self.app, der), base_url="http://harness"
        )

    def login(self, uid: str, password: str, der: bytes) -> TestClient:
        """A TestClient already carrying the bearer token for ``uid``."""
        client = self.client(der)
        response = client.post(
            "/sfs/api/login", data={"username": uid, "password": password}
        )
        assert response.status_code == 200, response.text
        client.headers["Authorization"] = f"Bearer {response.json()['token']}"
        return client

    def audit_events(self):
        return AuditLog(self.audit_path).events()


@pytest.fixture
def harness(tmp_path: Path) -> AppHarness:
    return AppHarness(tmp_path)


class LiveServer:
    """uvicorn on a pre-bound loopback socket, stopped on ``stop()``."""

    def __init__(self, app, keystore: Path, root_cert: Path) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind(("127.0.0.1", 0))
        self.port = sock.getsockname()[1]
        config = uvicorn.Config(
            app,
            log_level="warning",
            **uvicorn_tls_kwargs(str(keystore), None, str(root_cert)),
        )
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(
            target=self.server.run, kwargs={"sockets": [sock]}, daemon=True
        )
        self.thread.start()
        deadline = time.monotonic() + 15
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("loopback server did not start")
            time.sleep(0.02)
        self.base_url = f"https://127.0.0.1:{self.port}"

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)


class LiveDeployment:
    """AppHarness plus a real mutual-TLS listener in front of it."""

    def __init__(self, root: Path) -> None:
        self.harness = AppHarness(root)
        server_issued = self.harness.issue_server("127.0.0.1")
        self.keystore = write_identity(root / "server.pem", server_issued)
        self.server = LiveServer(
            self.harness.app, self.keystore, self.harness.ca_dir.root_cert_path
        )
        self.base_url = self.server.base_url

    @property
    def root_cert_path(self) -> Path:
        return self.harness.ca_dir.root_cert_path

    def identity(self, cn: str, days: int = 30) -> tuple[Path, IssuedCertificate]:
        issued = self.harness.issue_client(cn, days)
        return write_identity(self.harness.root / f"{cn}.pem", issued), issued

    def http_client(self, identity: Path | None = None, **kwargs) -> httpx.Client:
        return httpx.Client(
            verify=client_tls_context(self.root_cert_path, identity),
            base_url=self.base_url,
            **kwargs,
        )

    def login(self, client: httpx.Client, uid: str, password: str) -> str:
        response = client.post(
            "/sfs/api/login", data={"username": uid, "password": password}
        )
        assert response.status_code == 200, response.text
        token = response.json()["token"]
        client.headers["Authorization"] = f"Bearer {token}"
        return token

    def stop(self) -> None:
        self.server.stop()


@pytest.fixture
def live(tmp_path: Path):
    deployment = LiveDeployment(tmp_path)
    yield deployment
    deployment.stop()
