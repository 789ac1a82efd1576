"""HTTPS service layer: the system's single access point.

Submodules: :mod:`sessions` (token table), :mod:`tls` (mutual-TLS
listener plumbing), :mod:`schemas` (request/response bodies),
:mod:`app` (route handlers and wiring).
"""
from .app import AppState, CrlCache, ServerSettings, build_state, create_app, serve
from .sessions import Session, SessionTable

__all__ = [
    "AppState",
    "CrlCache",
    "ServerSettings",
    "Session",
    "SessionTable",
    "build_state",
    "create_app",
    "serve",
]
