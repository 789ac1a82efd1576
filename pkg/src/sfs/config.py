"""Loading of the ``.config`` options file.

The file is plain UTF-8 text: each line is a ``#`` comment, blank, or a
``key=value`` pair.  The parsed map is immutable; the first successful
:func:`load_options` call installs the process-wide instance and later
calls return that same instance.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import FormatError

# Documented option keys.  ``ca_server`` is accepted and stored but never
# consumed (reserved for future use); unknown keys are preserved as-is.
KEY_CA_SERVER = "ca_server"
KEY_DB_SERVER = "db_server"
KEY_KEYSTORE_FILEPATH = "keystore_filepath"
KEY_KEYSTORE_PASSWORD = "keystore_password"
KEY_CA_CERTIFICATE_FILEPATH = "ca_certificate_filepath"
KEY_CA_CERTIFICATE_PASSWORD = "ca_certificate_password"
KEY_LDAP_PASSWORD = "ldap_password"
KEY_LDAP_PRINCIPAL = "ldap_principal"
KEY_LDAP_SERVER = "ldap_server"

KNOWN_KEYS = frozenset(
    {
        KEY_CA_SERVER,
        KEY_DB_SERVER,
        KEY_KEYSTORE_FILEPATH,
        KEY_KEYSTORE_PASSWORD,
        KEY_CA_CERTIFICATE_FILEPATH,
        KEY_CA_CERTIFICATE_PASSWORD,
        KEY_LDAP_PASSWORD,
        KEY_LDAP_PRINCIPAL,
        KEY_LDAP_SERVER,
    }
)

DEFAULT_OPTIONS_FILENAME = ".config"


class OptionsError(FormatError):
    """The options file is missing, unreadable, or malformed."""


@dataclass(frozen=True)
class OptionsMap:
    """Immutable view of the parsed key=value entries."""

    entries: Mapping[str, str]
    source_path: str = "<string>"

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.entries.get(key, default)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def parse_options(text: str, source: str = "<string>") -> OptionsMap:
    """Parse options file content.

    Later duplicate keys overwrite earlier ones; keys and values are
    whitespace-trimmed; values may contain ``=`` (split on the first one).
    """
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise OptionsError(f"{source}:{lineno}: expected 'key=value', got {raw!r}")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return OptionsMap(entries=entries, source_path=source)


def read_options(path: str | Path) -> OptionsMap:
    """Read and parse an options file without touching the process singleton."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OptionsError(f"cannot read options file {path}: {exc}") from exc
    return parse_options(text, source=str(path))


_instance: OptionsMap | None = None
_instance_lock = threading.Lock()


def load_options(path: str | Path | None = None) -> OptionsMap:
    """Load the process-wide options instance.

    The first successful call parses ``path`` (default ``.config`` in the
    working directory) and installs the result; every later call returns
    that same instance regardless of arguments.
    """
    global _instance
    if _instance is not None:
        return _instance
    with _instance_lock:
        if _instance is None:
            _instance = read_options(path if path is not None else DEFAULT_OPTIONS_FILENAME)
        return _instance


def get_option(opts: OptionsMap, key: str) -> str | None:
    """Value bound to ``key``, or ``None``; never raises for unknown keys."""
    return opts.get(key)


def reset_options() -> None:
    """Drop the process-wide instance (for tests and re-exec scenarios)."""
    global _instance
    with _instance_lock:
        _instance = None
