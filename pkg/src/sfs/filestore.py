"""Users, groups, files, and access rights.

Relational core of the service: five tables (users, groups, files,
group_user, group_files) in an embedded SQLite store, plus
content-addressed blob storage for file bytes (SHA-256 of the content is
the handle, so identical uploads share one blob and every fetch can be
integrity-checked).

Access model: administrators and file owners hold full rights; everyone
else gets the union of the grants of the groups they belong to.  Sharing
happens only through group grants; there are no per-user grants.  The
``download`` right implies ``view`` (a downloadable file is always
listable), enforced by normalizing every stored right set.

Authorization decisions live here; the server enforces them.  Content
retrieval itself is policy-free (``fetch_content`` serves whoever asks),
so callers must check rights first.
"""
from __future__ import annotations

import enum
import hashlib
import os
import sqlite3
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    ConflictError,
    NotFoundError,
    OwnershipConflictError,
    SfsError,
    TooLargeError,
)

DEFAULT_MAX_UPLOAD_BYTES = 64 * 1024 * 1024


class IntegrityError(SfsError):
    """Stored content does not match its content-address handle."""


class Role(enum.Enum):
    ADMINISTRATOR = "administrator"
    NORMAL = "normal"


class Right(enum.Enum):
    VIEW = "view"
    DOWNLOAD = "download"
    DELETE = "delete"


RightSet = frozenset  # of Right

FULL_RIGHTS: frozenset[Right] = frozenset({Right.VIEW, Right.DOWNLOAD, Right.DELETE})
NO_RIGHTS: frozenset[Right] = frozenset()


def normalize_rights(rights: frozenset[Right]) -> frozenset[Right]:
    """Apply the download-implies-view rule."""
    if Right.DOWNLOAD in rights:
        return frozenset(rights) | {Right.VIEW}
    return frozenset(rights)


def rights_to_text(rights: frozenset[Right]) -> str:
    return ",".join(sorted(r.value for r in rights))


def text_to_rights(text: str) -> frozenset[Right]:
    if not text:
        return NO_RIGHTS
    return frozenset(Right(part) for part in text.split(","))


@dataclass(frozen=True)
class UserRecord:
    uid: str
    role: Role


@dataclass(frozen=True)
class GroupRecord:
    group_id: int
    name: str
    members: frozenset[str]


@dataclass(frozen=True)
class FileRecord:
    file_id: int
    name: str
    owner_uid: str
    size_bytes: int
    uploaded_at: str
    content_ref: str


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    uid  TEXT PRIMARY KEY,
    role TEXT NOT NULL CHECK (role IN ('administrator', 'normal'))
);
CREATE TABLE IF NOT EXISTS groups (
    group_id INTEGER PRIMARY KEY AUTOINCREMENT,
    name     TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS files (
    file_id     INTEGER PRIMARY KEY AUTOINCREMENT,
    name        TEXT NOT NULL,
    owner_uid   TEXT NOT NULL REFERENCES users(uid),
    size_bytes  INTEGER NOT NULL CHECK (size_bytes >= 0),
    uploaded_at TEXT NOT NULL,
    content_ref TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS group_user (
    group_id INTEGER NOT NULL REFERENCES groups(group_id),
    uid      TEXT NOT NULL REFERENCES users(uid),
    PRIMARY KEY (group_id, uid)
);
CREATE TABLE IF NOT EXISTS group_files (
    group_id INTEGER NOT NULL REFERENCES groups(group_id),
    file_id  INTEGER NOT NULL REFERENCES files(file_id),
    rights   TEXT NOT NULL,
    PRIMARY KEY (group_id, file_id)
);
"""


class Filestore:
    """Transactional store for the user/group/file model and file content.

    ``db_path=None`` keeps everything in memory (blobs included), which
    tests use heavily.  With a path, blobs live under ``blob_dir``
    (default: a ``blobs`` directory next to the database file).
    """

    def __init__(
        self,
        db_path: str | Path | None = None,
        blob_dir: str | Path | None = None,
        max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES,
    ) -> None:
        if max_upload_bytes < 0:
            raise ValueError("max_upload_bytes must be non-negative")
        self.max_upload_bytes = max_upload_bytes
        self._lock = threading.RLock()
        self._mem_blobs: dict[str, bytes] | None = None
        if db_path is None:
            self._conn = sqlite3.connect(":memory:", check_same_thread=False)
            self._blob_dir: Path | None = None
            self._mem_blobs = {}
        else:
            db_path = Path(db_path)
            db_path.parent.mkdir(parents=True, exist_ok=True)
            self._conn = sqlite3.connect(str(db_path), check_same_thread=False)
            self._blob_dir = Path(blob_dir) if blob_dir is not None else db_path.parent / "blobs"
            self._blob_dir.mkdir(parents=True, exist_ok=True)
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._conn.executescript(_SCHEMA)
        self._conn.commit()

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    # -- blob storage -----------------------------------------------------

    def _blob_write(self, content: bytes) -> str:
        ref = hashlib.sha256(content).hexdigest()
        if self._mem_blobs is not None:
            self._mem_blobs[ref] = content
            return ref
        assert self._blob_dir is not None
        path = self._blob_dir / ref
        if not path.exists():
            fd, tmp = tempfile.mkstemp(dir=str(self._blob_dir), prefix="in.")
            try:
                os.write(fd, content)
            finally:
                os.close(fd)
            os.replace(tmp, path)
        return ref

    def _blob_read(self, ref: str) -> bytes:
        if self._mem_blobs is not None:
            try:
                return self._mem_blobs[ref]
            except KeyError:
                raise IntegrityError(f"missing content blob {ref}") from None
        assert self._blob_dir is not None
        try:
            content = (self._blob_dir / ref).read_bytes()
        except OSError as exc:
            raise IntegrityError(f"missing content blob {ref}") from exc
        if hashlib.sha256(content).hexdigest() != ref:
            raise IntegrityError(f"content blob {ref} failed its checksum")
        return content

    def _blob_drop_if_unreferenced(self, ref: str) -> None:
        row = self._conn.execute(
            "SELECT COUNT(*) FROM files WHERE content_ref = ?", (ref,)
        ).fetchone()
        if row[0]:
            return
        if self._mem_blobs is not None:
            self._mem_blobs.pop(ref, None)
        else:
            assert self._blob_dir is not None
            try:
                (self._blob_dir / ref).unlink()
            except OSError:
                pass

    # -- users ------------------------------------------------------------

    def create_user(self, uid: str, role: Role) -> UserRecord:
        if not uid:
            raise ValueError("uid must be non-empty")
        with self._lock:
            try:
                with self._conn:
                    self._conn.execute(
                        "INSERT INTO users (uid, role) VALUES (?, ?)", (uid, role.value)
                    )
            except sqlite3.IntegrityError as exc:
                raise ConflictError(f"user {uid!r} already exists") from exc
        return UserRecord(uid=uid, role=role)

    def delete_user(self, uid: str) -> None:
        with self._lock, self._conn:
            self._require_user(uid)
            owned = self._conn.execute(
                "SELECT COUNT(*) FROM files WHERE owner_uid = ?", (uid,)
            ).fetchone()[0]
            if owned:
                raise OwnershipConflictError(
                    f"user {uid!r} still owns {owned} file(s); delete them first"
                )
            self._conn.execute("DELETE FROM group_user WHERE uid = ?", (uid,))
            self._conn.execute("DELETE FROM users WHERE uid = ?", (uid,))

    def set_role(self, uid: str, role: Role) -> None:
        with self._lock, self._conn:
            self._require_user(uid)
            self._conn.execute("UPDATE users SET role = ? WHERE uid = ?", (role.value, uid))

    def get_user(self, uid: str) -> UserRecord:
        with self._lock:
            return self._require_user(uid)

    def has_user(self, uid: str) -> bool:
        with self._lock:
            row = self._conn.execute("SELECT 1 FROM users WHERE uid = ?", (uid,)).fetchone()
        return row is not None

    def list_users(self) -> list[UserRecord]:
        with self._lock:
            rows = self._conn.execute("SELECT uid, role FROM users ORDER BY uid").fetchall()
        return [UserRecord(uid=r[0], role=Role(r[1])) for r in rows]

    def _require_user(self, uid: str) -> UserRecord:
        row = self._conn.execute("SELECT uid, role FROM users WHERE uid = ?", (uid,)).fetchone()
        if row is None:
            raise NotFoundError(f"no such user {uid!r}")
        return UserRecord(uid=row[0], role=Role(row[1]))

    # -- groups -----------------------------------------------------------

    def create_group(self, name: str) -> GroupRecord:
        if not name:
            raise ValueError("group name must be non-empty")
        with self._lock:
            try:
                with self._conn:
                    cur = self._conn.execute("INSERT INTO groups (name) VALUES (?)", (name,))
            except sqlite3.IntegrityError as exc:
                raise ConflictError(f"group {name!r} already exists") from exc
            return GroupRecord(group_id=cur.lastrowid, name=name, members=frozenset())

    def delete_group(self, group_id: int) -> None:
        with self._lock, self._conn:
            self._require_group(group_id)
            self._conn.execute("DELETE FROM group_files WHERE group_id = ?", (group_id,))
            self._conn.execute("DELETE FROM group_user WHERE group_id = ?", (group_id,))
            self._conn.execute("DELETE FROM groups WHERE group_id = ?", (group_id,))

    def add_member(self, group_id: int, uid: str) -> None:
        with self._lock, self._conn:
            self._require_group(group_id)
            self._require_user(uid)
            self._conn.execute(
                "INSERT OR IGNORE INTO group_user (group_id, uid) VALUES (?, ?)",
                (group_id, uid),
            )

    def remove_member(self, group_id: int, uid: str) -> None:
        with self._lock, self._conn:
            self._require_group(group_id)
            self._require_user(uid)
            self._conn.execute(
                "DELETE FROM group_user WHERE group_id = ? AND uid = ?", (group_id, uid)
            )

    def get_group(self, group_id: int) -> GroupRecord:
        with self._lock:
            return self._require_group(group_id)

    def list_groups(self) -> list[GroupRecord]:
        with self._lock:
            rows = self._conn.execute("SELECT group_id FROM groups ORDER BY group_id").fetchall()
            return [self._require_group(r[0]) for r in rows]

    def _require_group(self, group_id: int) -> GroupRecord:
        row = self._conn.execute(
            "SELECT group_id, name FROM groups WHERE group_id = ?", (group_id,)
        ).fetchone()
        if row is None:
            raise NotFoundError(f"no such group {group_id}")
        members = self._conn.execute(
            "SELECT uid FROM group_user WHERE group_id = ?", (group_id,)
        ).fetchall()
        return GroupRecord(group_id=row[0], name=row[1], members=frozenset(m[0] for m in members))

    # -- grants and rights ------------------------------------------------

    def grant(self, group_id: int, file_id: int, rights: frozenset[Right]) -> None:
        """Replace the (group, file) grant; an empty set removes it."""
        rights = normalize_rights(rights)
        with self._lock, self._conn:
            self._require_group(group_id)
            self._require_file(file_id)
            self._conn.execute(
                "DELETE FROM group_files WHERE group_id = ? AND file_id = ?",
                (group_id, file_id),
            )
            if rights:
                self._conn.execute(
                    "INSERT INTO group_files (group_id, file_id, rights) VALUES (?, ?, ?)",
                    (group_id, file_id, rights_to_text(rights)),
                )

    def grants_for_file(self, file_id: int) -> dict[int, frozenset[Right]]:
        with self._lock:
            self._require_file(file_id)
            rows = self._conn.execute(
                "SELECT group_id, rights FROM group_files WHERE file_id = ?", (file_id,)
            ).fetchall()
        return {r[0]: text_to_rights(r[1]) for r in rows}

    def effective_rights(self, uid: str, file_id: int) -> frozenset[Right]:
        with self._lock:
            user = self._require_user(uid)
            record = self._require_file(file_id)
            if user.role is Role.ADMINISTRATOR or record.owner_uid == uid:
                return FULL_RIGHTS
            rows = self._conn.execute(
                "SELECT gf.rights FROM group_files gf"
                " JOIN group_user gu ON gu.group_id = gf.group_id"
                " WHERE gu.uid = ? AND gf.file_id = ?",
                (uid, file_id),
            ).fetchall()
        combined: frozenset[Right] = NO_RIGHTS
        for (text,) in rows:
            combined |= text_to_rights(text)
        return normalize_rights(combined)

    # -- files ------------------------------------------------------------

    def store_file(self, uploader_uid: str, name: str, content: bytes) -> FileRecord:
        if len(content) > self.max_upload_bytes:
            raise TooLargeError(
                f"content is {len(content)} bytes; limit is {self.max_upload_bytes}"
            )
        with self._lock:
            self._require_user(uploader_uid)
            ref = self._blob_write(content)
            uploaded_at = datetime.now(timezone.utc).replace(microsecond=0).isoformat()
            with self._conn:
                cur = self._conn.execute(
                    "INSERT INTO files (name, owner_uid, size_bytes, uploaded_at, content_ref)"
                    " VALUES (?, ?, ?, ?, ?)",
                    (name, uploader_uid, len(content), uploaded_at, ref),
                )
            return FileRecord(
                file_id=cur.lastrowid,
                name=name,
                owner_uid=uploader_uid,
                size_bytes=len(content),
                uploaded_at=uploaded_at,
                content_ref=ref,
            )

    def fetch_content(self, file_id: int) -> bytes:
        with self._lock:
            record = self._require_file(file_id)
            return self._blob_read(record.content_ref)

    def delete_file(self, file_id: int) -> None:
        with self._lock:
            record = self._require_file(file_id)
            with self._conn:
                self._conn.execute("DELETE FROM group_files WHERE file_id = ?", (file_id,))
                self._conn.execute("DELETE FROM files WHERE file_id = ?", (file_id,))
            self._blob_drop_if_unreferenced(record.content_ref)

    def get_file(self, file_id: int) -> FileRecord:
        with self._lock:
            return self._require_file(file_id)

    def list_files(self) -> list[FileRecord]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT file_id, name, owner_uid, size_bytes, uploaded_at, content_ref"
                " FROM files ORDER BY file_id"
            ).fetchall()
        return [self._record_from_row(r) for r in rows]

    def list_files_for(self, uid: str) -> list[tuple[FileRecord, frozenset[Right]]]:
        """Every file the user can see, paired with their rights on it."""
        with self._lock:
            self._require_user(uid)
            files = self.list_files()
            out = []
            for record in files:
                rights = self.effective_rights(uid, record.file_id)
                if rights:
                    out.append((record, rights))
        return out

    def _require_file(self, file_id: int) -> FileRecord:
        row = self._conn.execute(
            "SELECT file_id, name, owner_uid, size_bytes, uploaded_at, content_ref"
            " FROM files WHERE file_id = ?",
            (file_id,),
        ).fetchone()
        if row is None:
            raise NotFoundError(f"no such file {file_id}")
        return self._record_from_row(row)

    @staticmethod
    def _record_from_row(row: tuple) -> FileRecord:
        return FileRecord(
            file_id=row[0],
            name=row[1],
            owner_uid=row[2],
            size_bytes=row[3],
            uploaded_at=row[4],
            content_ref=row[5],
        )
