"""Mutual-TLS listener plumbing.

The ASGI interface has no standard slot for the peer certificate, so a thin
protocol subclass grabs it from the TLS transport at connection time and
exposes it to handlers as ``scope["extensions"]["tls"]["client_cert_der"]``.
Handlers stay transport-agnostic: tests exercise them by injecting the
same extension with plain ASGI middleware.
"""
from __future__ import annotations

import hashlib
import ssl
from typing import Any

from uvicorn.protocols.http.h11_impl import H11Protocol

TLS_EXTENSION = "tls"
CLIENT_CERT_KEY = "client_cert_der"


def certificate_fingerprint(der: bytes) -> str:
    """SHA-256 of the certificate's DER encoding, lowercase hex."""
    return hashlib.sha256(der).hexdigest()


def client_cert_from_scope(scope: dict[str, Any]) -> bytes | None:
    return scope.get("extensions", {}).get(TLS_EXTENSION, {}).get(CLIENT_CERT_KEY)


class ClientCertH11Protocol(H11Protocol):
    """HTTP/1.1 protocol that forwards the peer certificate into the scope."""

    def connection_made(self, transport) -> None:  # type: ignore[override]
        super().connection_made(transport)
        ssl_object = transport.get_extra_info("ssl_object")
        der = ssl_object.getpeercert(binary_form=True) if ssl_object else None
        if der is None:
            return
        inner_app = self.app

        async def app_with_client_cert(scope, receive, send):
            if scope["type"] == "http":
                extensions = scope.setdefault("extensions", {})
                extensions.setdefault(TLS_EXTENSION, {})[CLIENT_CERT_KEY] = der
            await inner_app(scope, receive, send)

        self.app = app_with_client_cert


class StaticClientCertMiddleware:
    """Injects a fixed client certificate DER into every request scope.

    Stands in for the TLS layer when the app is exercised directly over
    ASGI (in-process tests); ``der=None`` simulates a certificate-less
    connection.
    """

    def __init__(self, app, der: bytes | None) -> None:
        self.app = app
        self.der = der

    async def __call__(self, scope, receive, send) -> None:
        if scope["type"] == "http" and self.der is not None:
            extensions = scope.setdefault("extensions", {})
            extensions.setdefault(TLS_EXTENSION, {})[CLIENT_CERT_KEY] = self.der
        await self.app(scope, receive, send)


def uvicorn_tls_kwargs(
    keystore_filepath: str,
    keystore_password: str | None,
    ca_certificate_filepath: str,
) -> dict[str, Any]:
    """uvicorn Config() keyword arguments enforcing client authentication.

    The keystore is a single PEM holding the server certificate followed
    by its private key (the form the CLI's ``ca issue --out`` writes).
    """
    return {
        "ssl_certfile": keystore_filepath,
        "ssl_keyfile": None,
        "ssl_keyfile_password": keystore_password,
        "ssl_ca_certs": ca_certificate_filepath,
        "ssl_cert_reqs": ssl.CERT_REQUIRED,
        "http": ClientCertH11Protocol,
    }
