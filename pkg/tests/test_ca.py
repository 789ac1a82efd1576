"""Certificate authority: issuance, revocation, verification, persistence.

Where practical the assertions are cross-checked against the ``openssl``
command line tool so the X.509 output is validated by an independent
implementation, not just by the library that produced it.
"""
import datetime as dt
import shutil
import subprocess

import pytest
from cryptography import x509
from cryptography.hazmat.primitives.asymmetric import padding
from cryptography.x509.oid import ExtendedKeyUsageOID

from sfs.ca import (
    AlreadyRevokedError,
    CaDirectory,
    CertificateFormatError,
    CertKind,
    IssuanceError,
    Verdict,
    decode_certificate,
    decode_crl,
    decode_private_key,
    encode_certificate,
    encode_crl,
    encode_private_key,
    export_crl,
    init_ca,
    issue_certificate,
    revoke_certificate,
    subject_common_name,
    verify_chain,
)
from sfs.errors import ConflictError, NotFoundError

UTC = dt.timezone.utc
T0 = dt.datetime(2026, 3, 1, 12, 0, 0, tzinfo=UTC)

openssl_available = shutil.which("openssl") is not None


@pytest.fixture(scope="module")
def anchor():
    """A shared root for read-only verification tests."""
    return init_ca("Anchor Root", validity_days=3650, now=T0)


@pytest.fixture(scope="module")
def foreign():
    """A second, unrelated root."""
    return init_ca("Foreign Root", validity_days=3650, now=T0)


# -- root initialization ----------------------------------------------------

def test_root_is_self_signed_serial_one(anchor):
    root = anchor.root_certificate
    assert root.serial_number == 1
    assert root.subject == root.issuer
    assert subject_common_name(root) == "Anchor Root"
    root.public_key().verify(
        root.signature,
        root.tbs_certificate_bytes,
        padding.PKCS1v15(),
        root.signature_hash_algorithm,
    )


def test_root_extensions(anchor):
    root = anchor.root_certificate
    bc = root.extensions.get_extension_for_class(x509.BasicConstraints)
    assert bc.critical and bc.value.ca
    ku = root.extensions.get_extension_for_class(x509.KeyUsage).value
    assert ku.key_cert_sign and ku.crl_sign and ku.digital_signature
    root.extensions.get_extension_for_class(x509.SubjectKeyIdentifier)


def test_root_validity_window(anchor):
    root = anchor.root_certificate
    assert root.not_valid_before_utc == T0 - dt.timedelta(minutes=5)
    assert root.not_valid_after_utc == T0 + dt.timedelta(days=3650)


def test_init_rejects_bad_arguments():
    with pytest.raises(ValueError):
        init_ca("", validity_days=365)
    with pytest.raises(ValueError):
        init_ca("CN", validity_days=0)


# -- issuance ---------------------------------------------------------------

def test_serials_are_contiguous():
    ca = init_ca("Serial Root", validity_days=365, now=T0)
    issued = [issue_certificate(ca, f"user{i}", CertKind.CLIENT, 30, now=T0) for i in range(4)]
    assert [c.serial for c in issued] == [2, 3, 4, 5]
    assert ca.next_serial == 6
    assert list(ca.issued_serials) == [1, 2, 3, 4, 5]


def test_client_certificate_profile(anchor):
    issued = issue_certificate(anchor, "alice", CertKind.CLIENT, 30, now=T0)
    cert = issued.certificate
    assert subject_common_name(cert) == "alice"
    assert cert.issuer == anchor.root_certificate.subject
    bc = cert.extensions.get_extension_for_class(x509.BasicConstraints)
    assert bc.critical and not bc.value.ca
    eku = cert.extensions.get_extension_for_class(x509.ExtendedKeyUsage).value
    assert list(eku) == [ExtendedKeyUsageOID.CLIENT_AUTH]
    with pytest.raises(x509.ExtensionNotFound):
        cert.extensions.get_extension_for_class(x509.SubjectAlternativeName)
    aki = cert.extensions.get_extension_for_class(x509.AuthorityKeyIdentifier).value
    ski = anchor.root_certificate.extensions.get_extension_for_class(x509.SubjectKeyIdentifier).value
    assert aki.key_identifier == ski.digest


def test_server_certificate_gets_dns_san(anchor):
    cert = issue_certificate(anchor, "files.example.net", CertKind.SERVER, 30, now=T0).certificate
    eku = cert.extensions.get_extension_for_class(x509.ExtendedKeyUsage).value
    assert list(eku) == [ExtendedKeyUsageOID.SERVER_AUTH]
    san = cert.extensions.get_extension_for_class(x509.SubjectAlternativeName).value
    assert san.get_values_for_type(x509.DNSName) == ["files.example.net"]


def test_server_certificate_gets_ip_san(anchor):
    import ipaddress

    cert = issue_certificate(anchor, "127.0.0.1", CertKind.SERVER, 30, now=T0).certificate
    san = cert.extensions.get_extension_for_class(x509.SubjectAlternativeName).value
    assert san.get_values_for_type(x509.IPAddress) == [ipaddress.ip_address("127.0.0.1")]


def test_issue_refuses_after_root_expiry():
    ca = init_ca("Short Root", validity_days=1, now=T0)
    with pytest.raises(IssuanceError):
        issue_certificate(ca, "late", CertKind.CLIENT, 1, now=T0 + dt.timedelta(days=2))


def test_issue_rejects_bad_arguments(anchor):
    with pytest.raises(ValueError):
        issue_certificate(anchor, "", CertKind.CLIENT, 30)
    with pytest.raises(ValueError):
        issue_certificate(anchor, "x", CertKind.CLIENT, 0)


# -- revocation and the CRL -------------------------------------------------

def test_revoke_lifecycle():
    ca = init_ca("Revoke Root", validity_days=365, now=T0)
    a = issue_certificate(ca, "a", CertKind.CLIENT, 30, now=T0)
    b = issue_certificate(ca, "b", CertKind.CLIENT, 30, now=T0)
    revoke_certificate(ca, b.serial, now=T0)
    assert set(ca.revoked) == {b.serial}
    with pytest.raises(AlreadyRevokedError):
        revoke_certificate(ca, b.serial)
    with pytest.raises(NotFoundError):
        revoke_certificate(ca, 999)
    assert a.serial not in ca.revoked


def test_crl_lists_serials_sorted_with_update_window():
    ca = init_ca("Crl Root", validity_days=365, now=T0)
    serials = [issue_certificate(ca, f"u{i}", CertKind.CLIENT, 30, now=T0).serial for i in range(3)]
    for s in reversed(serials):
        revoke_certificate(ca, s, now=T0)
    crl = export_crl(ca, now=T0)
    assert [entry.serial_number for entry in crl] == sorted(serials)
    assert crl.last_update_utc == T0
    assert crl.next_update_utc == T0 + dt.timedelta(days=30)
    assert crl.issuer == ca.root_certificate.subject
    assert crl.is_signature_valid(ca.root_certificate.public_key())


def test_empty_crl_is_valid():
    ca = init_ca("Empty Crl Root", validity_days=365, now=T0)
    crl = export_crl(ca, now=T0)
    assert len(list(crl)) == 0
    assert crl.is_signature_valid(ca.root_certificate.public_key())


# -- chain verification -----------------------------------------------------

def test_verdict_valid(anchor):
    cert = issue_certificate(anchor, "ok", CertKind.CLIENT, 30, now=T0).certificate
    assert verify_chain(cert, anchor.root_certificate, at=T0) is Verdict.VALID
    assert verify_chain(cert, anchor.root_certificate, crl=export_crl(anchor, now=T0), at=T0) is Verdict.VALID


def test_verdict_untrusted_foreign_issuer(anchor, foreign):
    cert = issue_certificate(foreign, "intruder", CertKind.CLIENT, 30, now=T0).certificate
    assert verify_chain(cert, anchor.root_certificate, at=T0) is Verdict.UNTRUSTED


def test_verdict_untrusted_self_signed(anchor):
    selfmade = init_ca("Self Signed", validity_days=30, now=T0).root_certificate
    assert verify_chain(selfmade, anchor.root_certificate, at=T0) is Verdict.UNTRUSTED


def test_verdict_expired_and_not_yet_valid(anchor):
    cert = issue_certificate(anchor, "brief", CertKind.CLIENT, 1, now=T0).certificate
    assert verify_chain(cert, anchor.root_certificate, at=T0 + dt.timedelta(days=2)) is Verdict.EXPIRED
    assert verify_chain(cert, anchor.root_certificate, at=T0 - dt.timedelta(hours=1)) is Verdict.EXPIRED


def test_verdict_revoked():
    ca = init_ca("V Root", validity_days=365, now=T0)
    issued = issue_certificate(ca, "gone", CertKind.CLIENT, 30, now=T0)
    revoke_certificate(ca, issued.serial, now=T0)
    crl = export_crl(ca, now=T0)
    assert verify_chain(issued.certificate, ca.root_certificate, crl=crl, at=T0) is Verdict.REVOKED


def test_revoked_takes_precedence_over_expired():
    ca = init_ca("P Root", validity_days=365, now=T0)
    issued = issue_certificate(ca, "old", CertKind.CLIENT, 1, now=T0)
    revoke_certificate(ca, issued.serial, now=T0)
    crl = export_crl(ca, now=T0)
    late = T0 + dt.timedelta(days=10)
    assert verify_chain(issued.certificate, ca.root_certificate, crl=crl, at=late) is Verdict.REVOKED


def test_revoked_takes_precedence_over_untrusted():
    # A foreign certificate whose serial collides with one on our CRL is
    # reported revoked: the listing is authoritative for that serial.
    ca = init_ca("Q Root", validity_days=365, now=T0)
    ours = issue_certificate(ca, "ours", CertKind.CLIENT, 30, now=T0)
    revoke_certificate(ca, ours.serial, now=T0)
    crl = export_crl(ca, now=T0)

    other = init_ca("Q Foreign", validity_days=365, now=T0)
    colliding = issue_certificate(other, "elsewhere", CertKind.CLIENT, 30, now=T0)
    assert colliding.serial == ours.serial
    assert verify_chain(colliding.certificate, ca.root_certificate, crl=crl, at=T0) is Verdict.REVOKED
    assert verify_chain(colliding.certificate, ca.root_certificate, at=T0) is Verdict.UNTRUSTED


# -- encoding round trips ---------------------------------------------------

def test_certificate_pem_der_round_trip(anchor):
    cert = anchor.root_certificate
    for fmt in ("PEM", "DER"):
        data = encode_certificate(cert, fmt)
        assert decode_certificate(data) == cert
    assert encode_certificate(cert, "PEM").startswith(b"-----BEGIN CERTIFICATE-----")
    with pytest.raises(ValueError):
        encode_certificate(cert, "pem")


@pytest.mark.parametrize("garbage", [b"", b"hello", b"-----BEGIN CERTIFICATE-----\nnope\n-----END CERTIFICATE-----\n"])
def test_decode_certificate_garbage(garbage):
    with pytest.raises(CertificateFormatError):
        decode_certificate(garbage)


def test_crl_round_trip():
    ca = init_ca("R Root", validity_days=365, now=T0)
    issued = issue_certificate(ca, "r", CertKind.CLIENT, 30, now=T0)
    revoke_certificate(ca, issued.serial, now=T0)
    data = encode_crl(export_crl(ca, now=T0))
    crl = decode_crl(data)
    assert [e.serial_number for e in crl] == [issued.serial]
    with pytest.raises(CertificateFormatError):
        decode_crl(b"junk")


def test_private_key_round_trip(anchor):
    plain = encode_private_key(anchor.root_key)
    assert b"BEGIN PRIVATE KEY" in plain
    restored = decode_private_key(plain)
    assert restored.private_numbers() == anchor.root_key.private_numbers()

    locked = encode_private_key(anchor.root_key, password="pa55")
    assert b"BEGIN ENCRYPTED PRIVATE KEY" in locked
    assert decode_private_key(locked, password="pa55").private_numbers() == anchor.root_key.private_numbers()
    with pytest.raises(Exception):
        decode_private_key(locked, password="wrong")


# -- independent verification through openssl -------------------------------

@pytest.mark.skipif(not openssl_available, reason="openssl binary not present")
def test_openssl_agrees_chain_is_valid(tmp_path, anchor):
    issued = issue_certificate(anchor, "oracle-client", CertKind.CLIENT, 30)
    root_pem = tmp_path / "root.pem"
    leaf_pem = tmp_path / "leaf.pem"
    root_pem.write_bytes(encode_certificate(anchor.root_certificate, "PEM"))
    leaf_pem.write_bytes(encode_certificate(issued.certificate, "PEM"))
    result = subprocess.run(
        ["openssl", "verify", "-CAfile", str(root_pem), str(leaf_pem)],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
    assert ": OK" in result.stdout


@pytest.mark.skipif(not openssl_available, reason="openssl binary not present")
def test_openssl_agrees_revoked_chain_fails(tmp_path):
    ca = init_ca("Oracle Root", validity_days=365)
    issued = issue_certificate(ca, "oracle-revoked", CertKind.CLIENT, 30)
    revoke_certificate(ca, issued.serial)
    root_pem = encode_certificate(ca.root_certificate, "PEM")
    crl_pem = encode_crl(export_crl(ca))
    trust = tmp_path / "trust.pem"
    trust.write_bytes(root_pem + crl_pem)
    leaf_pem = tmp_path / "leaf.pem"
    leaf_pem.write_bytes(encode_certificate(issued.certificate, "PEM"))
    result = subprocess.run(
        ["openssl", "verify", "-crl_check", "-CAfile", str(trust), str(leaf_pem)],
        capture_output=True,
        text=True,
    )
    assert result.returncode != 0
    assert "revoked" in (result.stdout + result.stderr).lower()


@pytest.mark.skipif(not openssl_available, reason="openssl binary not present")
def test_openssl_reads_crl_serials(tmp_path):
    ca = init_ca("Crl Text Root", validity_days=365)
    issued = issue_certificate(ca, "x", CertKind.CLIENT, 30)
    revoke_certificate(ca, issued.serial)
    crl_path = tmp_path / "crl.pem"
    crl_path.write_bytes(encode_crl(export_crl(ca)))
    result = subprocess.run(
        ["openssl", "crl", "-in", str(crl_path), "-noout", "-text"],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0
    assert f"Serial Number: {issued.serial:02X}" in result.stdout


# -- on-disk persistence ----------------------------------------------------

def test_directory_initialize_creates_layout(tmp_path):
    cadir = CaDirectory(tmp_path / "ca")
    state = cadir.initialize("Disk Root", validity_days=365, now=T0)
    assert cadir.root_key_path.exists()
    assert oct(cadir.root_key_path.stat().st_mode & 0o777) == "0o600"
    assert cadir.root_cert_path.exists()
    assert cadir.serial_path.read_text().strip() == "2"
    assert cadir.crl_path.exists()
    assert state.next_serial == 2


def test_directory_refuses_reinitialize(tmp_path):
    cadir = CaDirectory(tmp_path / "ca")
    cadir.initialize("Disk Root", validity_days=365, now=T0)
    with pytest.raises(ConflictError):
        cadir.initialize("Disk Root", validity_days=365, now=T0)


def test_directory_load_round_trips_state(tmp_path):
    cadir = CaDirectory(tmp_path / "ca")
    state = cadir.initialize("Disk Root", validity_days=365, now=T0)
    issued = issue_certificate(state, "persist-me", CertKind.CLIENT, 30, now=T0)
    revoke_certificate(state, issued.serial, now=T0)
    cadir.save(state, now=T0)

    loaded = cadir.load()
    assert loaded.next_serial == state.next_serial
    assert set(loaded.revoked) == {issued.serial}
    assert loaded.root_certificate == state.root_certificate
    assert loaded.root_key.private_numbers() == state.root_key.private_numbers()
    verdict = verify_chain(
        issued.certificate, loaded.root_certificate, crl=cadir.load_crl(), at=T0
    )
    assert verdict is Verdict.REVOKED


def test_directory_load_missing(tmp_path):
    with pytest.raises(NotFoundError):
        CaDirectory(tmp_path / "nowhere").load()


def test_directory_lock_is_exclusive(tmp_path):
    from filelock import Timeout

    cadir = CaDirectory(tmp_path / "ca")
    first = cadir.lock()
    with first:
        second = cadir.lock(timeout=0.1)
        with pytest.raises(Timeout):
            second.acquire()
