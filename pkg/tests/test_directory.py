"""Credential directory and its LDIF wire format."""
import base64
import random

import pytest

from sfs.credentials import make_credentials, ssha_hash
from sfs.directory import (
    Directory,
    DirectoryEntry,
    LdifError,
    format_ldif,
    parse_ldif,
)
from sfs.errors import ConflictError, NotFoundError

HASH = ssha_hash("pw", b"\x01\x02\x03\x04")


def entry(uid: str, password: str = "pw", certificate: bytes | None = None) -> DirectoryEntry:
    return DirectoryEntry(
        uid=uid,
        user_password=ssha_hash(password, b"\x01\x02\x03\x04"),
        user_certificate=certificate,
    )


# -- entry validation -------------------------------------------------------

def test_entry_requires_uid_and_valid_hash():
    with pytest.raises(ValueError):
        DirectoryEntry(uid="", user_password=HASH)
    with pytest.raises(Exception):
        DirectoryEntry(uid="x", user_password="not-a-hash")


# -- LDIF rendering ---------------------------------------------------------

def test_format_single_entry():
    text = format_ldif([entry("alice")])
    assert text == (
        "dn: uid=alice,ou=people\n"
        "objectClass: inetOrgPerson\n"
        "uid: alice\n"
        f"userPassword: {HASH}\n"
    )


def test_format_includes_certificate_base64():
    cert = bytes(range(64))
    text = format_ldif([entry("bob", certificate=cert)])
    assert "userCertificate;binary:: " in text
    joined = _logical_lines(text)
    line = next(l for l in joined if l.startswith("userCertificate;binary:: "))
    assert base64.b64decode(line.split(":: ", 1)[1]) == cert


def test_format_wraps_at_76_columns():
    cert = bytes(range(256)) * 4
    text = format_ldif([entry("carol", certificate=cert)])
    for line in text.splitlines():
        assert len(line) <= 76
    continuations = [l for l in text.splitlines() if l.startswith(" ")]
    assert continuations, "a kilobyte of base64 must need continuation lines"


def test_format_empty_list():
    assert format_ldif([]) == ""


def test_records_separated_by_blank_line():
    text = format_ldif([entry("a"), entry("b")])
    assert "\n\ndn: uid=b,ou=people\n" in text
    assert text.endswith("\n")
    assert not text.endswith("\n\n")


def test_dn_special_characters_escaped():
    text = format_ldif([entry("odd,name+x")])
    assert "dn: uid=odd\\,name\\+x,ou=people" in text


def _logical_lines(text: str) -> list[str]:
    out: list[str] = []
    for raw in text.splitlines():
        if raw.startswith(" "):
            out[-1] += raw[1:]
        else:
            out.append(raw)
    return out


# -- LDIF parsing -----------------------------------------------------------

def test_parse_round_trip_identity():
    entries = [
        entry("alice"),
        entry("bob", certificate=bytes(range(200))),
        entry("carol"),
    ]
    text = format_ldif(entries)
    assert parse_ldif(text) == entries
    # Formatting what was parsed reproduces the text byte for byte.
    assert format_ldif(parse_ldif(text)) == text


def test_parse_accepts_version_header_and_comments():
    text = "version: 1\n# a comment\n\n" + format_ldif([entry("dave")])
    assert [e.uid for e in parse_ldif(text)] == ["dave"]


def test_parse_base64_text_attribute():
    b64 = base64.b64encode("erin".encode()).decode()
    text = (
        "dn: uid=erin,ou=people\n"
        "objectClass: inetOrgPerson\n"
        f"uid:: {b64}\n"
        f"userPassword: {HASH}\n"
    )
    assert parse_ldif(text)[0].uid == "erin"


def test_parse_errors_carry_line_numbers():
    with pytest.raises(LdifError, match="line 2"):
        parse_ldif("dn: uid=x,ou=people\nbogus line without colon\n")
    with pytest.raises(LdifError, match="line 1"):
        parse_ldif(" leading continuation\n")
    with pytest.raises(LdifError, match="line 3"):
        parse_ldif("dn: uid=x,ou=people\nuid: x\nuserPassword:: %%%\n")


def test_parse_rejects_url_values():
    with pytest.raises(LdifError, match="URL"):
        parse_ldif("dn: uid=x,ou=people\nuid: x\nuserPassword:< file:///etc/passwd\n")


def test_parse_rejects_record_missing_required_attributes():
    with pytest.raises(LdifError, match="missing uid"):
        parse_ldif(f"dn: uid=x,ou=people\nuserPassword: {HASH}\n")
    with pytest.raises(LdifError, match="missing userPassword"):
        parse_ldif("dn: uid=x,ou=people\nuid: x\n")


def test_parse_rejects_invalid_password_hash():
    with pytest.raises(LdifError, match="invalid entry"):
        parse_ldif("dn: uid=x,ou=people\nuid: x\nuserPassword: cleartext\n")


# -- directory operations against a reference map ---------------------------

def test_add_get_delete():
    d = Directory()
    d.add_user(entry("alice"))
    creds = d.get_credentials("alice")
    assert creds.username == "alice"
    assert creds.password_hash == HASH
    assert creds.certificate is None
    assert "alice" in d and len(d) == 1
    d.delete_user("alice")
    assert "alice" not in d and len(d) == 0


def test_duplicate_add_conflicts():
    d = Directory()
    d.add_user(entry("alice"))
    with pytest.raises(ConflictError):
        d.add_user(entry("alice"))


def test_missing_uid_not_found():
    d = Directory()
    for call in (
        lambda: d.delete_user("ghost"),
        lambda: d.get_credentials("ghost"),
        lambda: d.set_password("ghost", HASH),
        lambda: d.set_certificate("ghost", None),
    ):
        with pytest.raises(NotFoundError):
            call()


def test_lookup_is_case_sensitive():
    d = Directory()
    d.add_user(entry("Alice"))
    with pytest.raises(NotFoundError):
        d.get_credentials("alice")


def test_set_password_preserves_certificate():
    d = Directory()
    d.add_user(entry("bob", certificate=b"\x01\x02"))
    new_hash = make_credentials("bob", "fresh").password_hash
    d.set_password("bob", new_hash)
    creds = d.get_credentials("bob")
    assert creds.password_hash == new_hash
    assert creds.certificate == b"\x01\x02"


def test_set_certificate_and_unset():
    d = Directory()
    d.add_user(entry("carol"))
    d.set_certificate("carol", b"\x30\x03")
    assert d.get_credentials("carol").certificate == b"\x30\x03"
    d.set_certificate("carol", None)
    assert d.get_credentials("carol").certificate is None


def test_random_operations_match_reference_map(tmp_path):
    """Drive the directory and a plain dict with the same operation stream."""
    rng = random.Random(20240311)
    d = Directory(tmp_path / "users.ldif")
    reference: dict[str, DirectoryEntry] = {}
    uids = [f"user{i}" for i in range(12)]

    for step in range(500):
        uid = rng.choice(uids)
        op = rng.randrange(5)
        if op == 0:
            e = entry(uid, password=f"pw{step}")
            if uid in reference:
                with pytest.raises(ConflictError):
                    d.add_user(e)
            else:
                d.add_user(e)
                reference[uid] = e
        elif op == 1:
            if uid in reference:
                d.delete_user(uid)
                del reference[uid]
            else:
                with pytest.raises(NotFoundError):
                    d.delete_user(uid)
        elif op == 2:
            if uid in reference:
                got = d.get_credentials(uid)
                want = reference[uid]
                assert (got.username, got.password_hash, got.certificate) == (
                    want.uid, want.user_password, want.user_certificate
                )
            else:
                with pytest.raises(NotFoundError):
                    d.get_credentials(uid)
        elif op == 3:
            new_hash = ssha_hash(f"pw{step}", step.to_bytes(4, "big"))
            if uid in reference:
                d.set_password(uid, new_hash)
                old = reference[uid]
                reference[uid] = DirectoryEntry(uid, new_hash, old.user_certificate)
            else:
                with pytest.raises(NotFoundError):
                    d.set_password(uid, new_hash)
        else:
            cert = bytes([step % 256]) * 8 if step % 3 else None
            if uid in reference:
                d.set_certificate(uid, cert)
                old = reference[uid]
                reference[uid] = DirectoryEntry(uid, old.user_password, cert)
            else:
                with pytest.raises(NotFoundError):
                    d.set_certificate(uid, cert)
        assert d.list_uids() == sorted(reference)

    # The persisted file reloads to the same state.
    reloaded = Directory(tmp_path / "users.ldif")
    assert reloaded.list_uids() == sorted(reference)
    for uid in reference:
        got = reloaded.get_credentials(uid)
        want = reference[uid]
        assert (got.password_hash, got.certificate) == (want.user_password, want.user_certificate)


# -- persistence and import/export ------------------------------------------

def test_persistence_file_mode_and_reload(tmp_path):
    path = tmp_path / "users.ldif"
    d = Directory(path)
    d.add_user(entry("alice", certificate=bytes(range(100))))
    assert oct(path.stat().st_mode & 0o777) == "0o600"
    again = Directory(path)
    assert again.get_credentials("alice").certificate == bytes(range(100))


def test_export_import_ldif_round_trip():
    d = Directory()
    d.add_user(entry("zoe"))
    d.add_user(entry("adam", certificate=b"\xde\xad\xbe\xef" * 30))
    text = d.export_ldif()
    assert text.index("uid=adam") < text.index("uid=zoe")  # sorted export

    other = Directory()
    other.add_user(entry("tobedropped"))
    other.import_ldif(text)
    assert other.list_uids() == ["adam", "zoe"]
    assert other.export_ldif() == text


def test_import_rejects_duplicate_uid_and_leaves_state_intact():
    d = Directory()
    d.add_user(entry("keep"))
    doubled = format_ldif([entry("dup"), entry("dup")])
    with pytest.raises(LdifError, match="duplicate uid"):
        d.import_ldif(doubled)
    assert d.list_uids() == ["keep"]


def test_import_empty_clears():
    d = Directory()
    d.add_user(entry("gone"))
    d.import_ldif("")
    assert len(d) == 0
