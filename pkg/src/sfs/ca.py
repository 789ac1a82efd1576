"""Internal certificate authority.

Root initialization, server/client certificate issuance, revocation list
maintenance, and chain verification.  Keys are RSA-2048 with SHA-256
signatures so issued certificates work with any modern TLS stack.

State lives either in memory (:class:`CaState`) or on disk in a CA
directory (:class:`CaDirectory`) holding four files: the root key (PEM,
mode 0600), the root certificate (PEM), the serial counter (text), and
the CRL (PEM).  Issuance and revocation must be serialized by the caller;
:meth:`CaDirectory.lock` provides an exclusive lock for that.
"""
from __future__ import annotations

import enum
import ipaddress
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from cryptography import x509
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.x509.oid import ExtendedKeyUsageOID, NameOID
from filelock import FileLock

from .errors import ConflictError, FormatError, NotFoundError, SfsError

KEY_BITS = 2048
ROOT_SERIAL = 1
CRL_NEXT_UPDATE_DAYS = 30

# Backdate notBefore slightly so fresh certificates survive clock skew
# between the issuing host and verifiers.
_BACKDATE = timedelta(minutes=5)


class CertificateFormatError(FormatError):
    """Bytes do not decode as an X.509 structure."""


class IssuanceError(SfsError):
    """The CA cannot issue (e.g. the root certificate has expired)."""


class AlreadyRevokedError(ConflictError):
    """The serial is already on the revocation list."""


class CertKind(enum.Enum):
    SERVER = "server"
    CLIENT = "client"


class Verdict(enum.Enum):
    """Chain verification result.  Precedence: revoked > untrusted > expired."""

    VALID = "valid"
    UNTRUSTED = "untrusted"
    EXPIRED = "expired"
    REVOKED = "revoked"


@dataclass
class CaState:
    """Trust anchor state: root key pair, root certificate, serial counter,
    and the revoked set (serial -> revocation time, UTC)."""

    root_key: rsa.RSAPrivateKey
    root_certificate: x509.Certificate
    next_serial: int
    revoked: dict[int, datetime] = field(default_factory=dict)

    @property
    def issued_serials(self) -> range:
        # Serials are assigned contiguously starting at the root's.
        return range(ROOT_SERIAL, self.next_serial)


@dataclass(frozen=True)
class IssuedCertificate:
    certificate: x509.Certificate
    private_key: rsa.RSAPrivateKey
    serial: int
    kind: CertKind
    subject_cn: str


def _utcnow() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _name(common_name: str) -> x509.Name:
    return x509.Name([x509.NameAttribute(NameOID.COMMON_NAME, common_name)])


def subject_common_name(cert: x509.Certificate) -> str | None:
    """The certificate's subject CN, or None when absent."""
    attrs = cert.subject.get_attributes_for_oid(NameOID.COMMON_NAME)
    if not attrs:
        return None
    value = attrs[0].value
    return value if isinstance(value, str) else value.decode("utf-8")


def init_ca(subject_cn: str, validity_days: int, now: datetime | None = None) -> CaState:
    """Create a fresh self-signed root.  The root takes serial 1."""
    if not subject_cn:
        raise ValueError("subject_cn must be non-empty")
    if validity_days < 1:
        raise ValueError(f"validity_days must be >= 1, got {validity_days}")
    now = now or _utcnow()
    key = rsa.generate_private_key(public_exponent=65537, key_size=KEY_BITS)
    name = _name(subject_cn)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(ROOT_SERIAL)
        .not_valid_before(now - _BACKDATE)
        .not_valid_after(now + timedelta(days=validity_days))
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .add_extension(
            x509.KeyUsage(
                digital_signature=True,
                key_cert_sign=True,
                crl_sign=True,
                content_commitment=False,
                key_encipherment=False,
                data_encipherment=False,
                key_agreement=False,
                encipher_only=False,
                decipher_only=False,
            ),
            critical=True,
        )
        .add_extension(x509.SubjectKeyIdentifier.from_public_key(key.public_key()), critical=False)
        .sign(key, hashes.SHA256())
    )
    return CaState(root_key=key, root_certificate=cert, next_serial=ROOT_SERIAL + 1)


def issue_certificate(
    ca: CaState,
    subject_cn: str,
    kind: CertKind,
    validity_days: int,
    now: datetime | None = None,
) -> IssuedCertificate:
    """Issue a certificate signed by the root and advance the serial counter.

    Client certificates carry the clientAuth usage and their subject CN is
    the login uid they will authenticate; server certificates carry
    serverAuth plus a SAN for the CN so hostname verification works.
    """
    if not subject_cn:
        raise ValueError("subject_cn must be non-empty")
    if validity_days < 1:
        raise ValueError(f"validity_days must be >= 1, got {validity_days}")
    now = now or _utcnow()
    if now > ca.root_certificate.not_valid_after_utc:
        raise IssuanceError("root certificate has expired")

    key = rsa.generate_private_key(public_exponent=65537, key_size=KEY_BITS)
    serial = ca.next_serial
    eku = ExtendedKeyUsageOID.SERVER_AUTH if kind is CertKind.SERVER else ExtendedKeyUsageOID.CLIENT_AUTH
    builder = (
        x509.CertificateBuilder()
        .subject_name(_name(subject_cn))
        .issuer_name(ca.root_certificate.subject)
        .public_key(key.public_key())
        .serial_number(serial)
        .not_valid_before(now - _BACKDATE)
        .not_valid_after(now + timedelta(days=validity_days))
        .add_extension(x509.BasicConstraints(ca=False, path_length=None), critical=True)
        .add_extension(
            x509.KeyUsage(
                digital_signature=True,
                key_encipherment=True,
                content_commitment=False,
                data_encipherment=False,
                key_agreement=False,
                key_cert_sign=False,
                crl_sign=False,
                encipher_only=False,
                decipher_only=False,
            ),
            critical=True,
        )
        .add_extension(x509.ExtendedKeyUsage([eku]), critical=False)
        .add_extension(x509.SubjectKeyIdentifier.from_public_key(key.public_key()), critical=False)
        .add_extension(
            x509.AuthorityKeyIdentifier.from_issuer_public_key(ca.root_certificate.public_key()),
            critical=False,
        )
    )
    if kind is CertKind.SERVER:
        try:
            san: x509.GeneralName = x509.IPAddress(ipaddress.ip_address(subject_cn))
        except ValueError:
            san = x509.DNSName(subject_cn)
        builder = builder.add_extension(x509.SubjectAlternativeName([san]), critical=False)

    cert = builder.sign(ca.root_key, hashes.SHA256())
    ca.next_serial += 1
    return IssuedCertificate(
        certificate=cert, private_key=key, serial=serial, kind=kind, subject_cn=subject_cn
    )


def revoke_certificate(ca: CaState, serial: int, now: datetime | None = None) -> None:
    """Add an issued serial to the revoked set."""
    if serial not in ca.issued_serials:
        raise NotFoundError(f"serial {serial} was never issued")
    if serial in ca.revoked:
        raise AlreadyRevokedError(f"serial {serial} is already revoked")
    ca.revoked[serial] = now or _utcnow()


def export_crl(ca: CaState, now: datetime | None = None) -> x509.CertificateRevocationList:
    """Build the signed CRL reflecting the current revoked set."""
    now = now or _utcnow()
    builder = (
        x509.CertificateRevocationListBuilder()
        .issuer_name(ca.root_certificate.subject)
        .last_update(now)
        .next_update(now + timedelta(days=CRL_NEXT_UPDATE_DAYS))
        .add_extension(
            x509.AuthorityKeyIdentifier.from_issuer_public_key(ca.root_certificate.public_key()),
            critical=False,
        )
    )
    for serial in sorted(ca.revoked):
        entry = (
            x509.RevokedCertificateBuilder()
            .serial_number(serial)
            .revocation_date(ca.revoked[serial])
            .build()
        )
        builder = builder.add_revoked_certificate(entry)
    return builder.sign(ca.root_key, hashes.SHA256())


def verify_chain(
    cert: x509.Certificate,
    root: x509.Certificate,
    crl: x509.CertificateRevocationList | None = None,
    at: datetime | None = None,
) -> Verdict:
    """Verdict for ``cert`` under ``root`` and an optional CRL.

    Revocation is checked first so it is never masked by other failures;
    then the signature under the root's key; then the validity window.
    """
    at = at or _utcnow()
    if crl is not None and crl.get_revoked_certificate_by_serial_number(cert.serial_number) is not None:
        return Verdict.REVOKED
    try:
        root.public_key().verify(
            cert.signature,
            cert.tbs_certificate_bytes,
            padding.PKCS1v15(),
            cert.signature_hash_algorithm,
        )
    except (InvalidSignature, TypeError, ValueError):
        return Verdict.UNTRUSTED
    if at < cert.not_valid_before_utc or at > cert.not_valid_after_utc:
        return Verdict.EXPIRED
    return Verdict.VALID


# ---------------------------------------------------------------------------
# Encoding helpers

def encode_certificate(cert: x509.Certificate, fmt: str) -> bytes:
    """Encode as ``"DER"`` (canonical binary) or ``"PEM"`` (base64 armored)."""
    if fmt == "DER":
        return cert.public_bytes(serialization.Encoding.DER)
    if fmt == "PEM":
        return cert.public_bytes(serialization.Encoding.PEM)
    raise ValueError(f"unknown certificate format {fmt!r}")


def decode_certificate(data: bytes) -> x509.Certificate:
    """Decode PEM or DER certificate bytes."""
    try:
        if b"-----BEGIN" in data:
            return x509.load_pem_x509_certificate(data)
        return x509.load_der_x509_certificate(data)
    except ValueError as exc:
        raise CertificateFormatError(f"undecodable certificate: {exc}") from exc


def encode_crl(crl: x509.CertificateRevocationList) -> bytes:
    return crl.public_bytes(serialization.Encoding.PEM)


def decode_crl(data: bytes) -> x509.CertificateRevocationList:
    try:
        if b"-----BEGIN" in data:
            return x509.load_pem_x509_crl(data)
        return x509.load_der_x509_crl(data)
    except ValueError as exc:
        raise CertificateFormatError(f"undecodable CRL: {exc}") from exc


def encode_private_key(key: rsa.RSAPrivateKey, password: str | None = None) -> bytes:
    encryption: serialization.KeySerializationEncryption
    if password:
        encryption = serialization.BestAvailableEncryption(password.encode("utf-8"))
    else:
        encryption = serialization.NoEncryption()
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        encryption,
    )


def decode_private_key(data: bytes, password: str | None = None) -> rsa.RSAPrivateKey:
    key = serialization.load_pem_private_key(
        data, password=password.encode("utf-8") if password else None
    )
    if not isinstance(key, rsa.RSAPrivateKey):
        raise CertificateFormatError("expected an RSA private key")
    return key


# ---------------------------------------------------------------------------
# On-disk persistence

ROOT_KEY_FILE = "root_key.pem"
ROOT_CERT_FILE = "root_cert.pem"
SERIAL_FILE = "serial.txt"
CRL_FILE = "crl.pem"
LOCK_FILE = ".lock"


def _write_atomic(path: Path, data: bytes, mode: int = 0o644) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".")
    try:
        os.write(fd, data)
        os.fchmod(fd, mode)
    finally:
        os.close(fd)
    os.replace(tmp, path)


class CaDirectory:
    """File layout and locking for a CA's persistent state."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    @property
    def root_key_path(self) -> Path:
        return self.path / ROOT_KEY_FILE

    @property
    def root_cert_path(self) -> Path:
        return self.path / ROOT_CERT_FILE

    @property
    def serial_path(self) -> Path:
        return self.path / SERIAL_FILE

    @property
    def crl_path(self) -> Path:
        return self.path / CRL_FILE

    def exists(self) -> bool:
        return self.root_key_path.exists() or self.root_cert_path.exists()

    def lock(self, timeout: float = 10.0) -> FileLock:
        """Exclusive lock serializing issuance/revocation across processes."""
        self.path.mkdir(parents=True, exist_ok=True)
        return FileLock(str(self.path / LOCK_FILE), timeout=timeout)

    def initialize(self, subject_cn: str, validity_days: int, now: datetime | None = None) -> CaState:
        """Create the CA file layout.  Refuses to overwrite an existing CA."""
        if self.exists():
            raise ConflictError(f"CA directory {self.path} is already initialized")
        self.path.mkdir(parents=True, exist_ok=True)
        state = init_ca(subject_cn, validity_days, now=now)
        _write_atomic(self.root_key_path, encode_private_key(state.root_key), mode=0o600)
        _write_atomic(self.root_cert_path, encode_certificate(state.root_certificate, "PEM"))
        self.save(state, now=now)
        return state

    def load(self) -> CaState:
        if not self.exists():
            raise NotFoundError(f"no CA at {self.path}")
        key = decode_private_key(self.root_key_path.read_bytes())
        cert = decode_certificate(self.root_cert_path.read_bytes())
        next_serial = int(self.serial_path.read_text(encoding="ascii").strip())
        revoked: dict[int, datetime] = {}
        if self.crl_path.exists():
            crl = decode_crl(self.crl_path.read_bytes())
            revoked = {entry.serial_number: entry.revocation_date_utc for entry in crl}
        return CaState(root_key=key, root_certificate=cert, next_serial=next_serial, revoked=revoked)

    def save(self, state: CaState, now: datetime | None = None) -> None:
        """Persist the mutable parts: serial counter and CRL."""
        _write_atomic(self.serial_path, f"{state.next_serial}\n".encode("ascii"))
        _write_atomic(self.crl_path, encode_crl(export_crl(state, now=now)))

    def load_crl(self) -> x509.CertificateRevocationList:
        return decode_crl(self.crl_path.read_bytes())
