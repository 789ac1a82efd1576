"""HTTP API, application state, and deployment wiring.

Every handler speaks JSON except download (raw bytes) and the login
page (HTML).  Authentication is two-factor: the TLS layer already
required a CA-issued client certificate, and login additionally checks
the password and that the certificate's subject CN names the same user.
After login a bearer token rides the Authorization header; each request
re-checks that the presenting certificate matches the session's
fingerprint and is not on the current CRL, so revocation takes effect
mid-session as soon as the CRL file changes.

Status mapping: 200 success, 400 bad input, 401 unauthenticated,
403 forbidden, 404 not found, 409 conflict, 413 too large.  Login
failures are deliberately indistinguishable to the client; the audit
log carries the precise cause.
"""
from __future__ import annotations

import secrets
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path

import uvicorn
from cryptography import x509
from fastapi import FastAPI, Form, HTTPException, Request, UploadFile
from fastapi.responses import FileResponse, HTMLResponse, RedirectResponse, Response
from fastapi.staticfiles import StaticFiles

from ..audit import (
    AuditLog,
    AuditStorageError,
    Operation,
    Outcome,
    format_line,
    make_event,
)
from ..ca import (
    CertificateFormatError,
    Verdict,
    decode_certificate,
    decode_crl,
    encode_certificate,
    subject_common_name,
    verify_chain,
)
from ..config import (
    KEY_CA_CERTIFICATE_FILEPATH,
    KEY_CA_CERTIFICATE_PASSWORD,
    KEY_KEYSTORE_FILEPATH,
    KEY_KEYSTORE_PASSWORD,
    OptionsError,
    OptionsMap,
)
from ..credentials import credentials_match, make_credentials, ssha_hash, ssha_verify
from ..directory import Directory, DirectoryEntry
from ..errors import ConflictError, NotFoundError, OwnershipConflictError, TooLargeError
from ..filestore import (
    DEFAULT_MAX_UPLOAD_BYTES,
    FULL_RIGHTS,
    FileRecord,
    Filestore,
    Right,
    Role,
)
from .schemas import (
    AclGrant,
    AclResponse,
    AclUpdate,
    CertBindResponse,
    FileEntry,
    FileListResponse,
    GroupCreateRequest,
    GroupEntry,
    GroupListResponse,
    LoginResponse,
    MemberRequest,
    OkResponse,
    UserAddRequest,
    UserEntry,
    UserListResponse,
    UserModifyRequest,
)
from .sessions import DEFAULT_IDLE_SECONDS, Session, SessionTable
from .tls import certificate_fingerprint, client_cert_from_scope, uvicorn_tls_kwargs

ANONYMOUS = "anonymous"
GENERIC_LOGIN_FAILURE = "authentication failed"

# Deployment keys read from the same options file as the documented
# connection keys; all have working defaults.
KEY_LISTEN_ADDRESS = "listen_address"
KEY_LISTEN_PORT = "listen_port"
KEY_DATA_DIR = "data_dir"
KEY_CRL_FILEPATH = "crl_filepath"
KEY_AUDIT_LOG_FILEPATH = "audit_log_filepath"
KEY_WEBUI_ROOT = "webui_root"
KEY_MAX_UPLOAD_BYTES = "max_upload_bytes"
KEY_SESSION_IDLE_SECONDS = "session_idle_seconds"

DEFAULT_LISTEN_ADDRESS = "127.0.0.1"
DEFAULT_LISTEN_PORT = 8443

_RIGHT_ORDER = (Right.VIEW, Right.DOWNLOAD, Right.DELETE)

_LOGIN_PAGE = """<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>Secure File Exchange Service</title></head>
<body>
<h1>Secure File Exchange Service</h1>
<p>Log on with your username and password. Your browser must present
your client certificate for this connection.</p>
<form method="post" action="/sfs/api/login">
  <label>Username <input name="username" autocomplete="username"></label><br>
  <label>Password <input name="password" type="password" autocomplete="current-password"></label><br>
  <button type="submit">Log on</button>
</form>
</body>
</html>
"""


def rights_to_list(rights: frozenset[Right]) -> list[str]:
    return [r.value for r in _RIGHT_ORDER if r in rights]


def list_to_rights(values: list[str]) -> frozenset[Right]:
    return frozenset(Right(v) for v in values)


class CrlCache:
    """Current CRL, reloaded whenever the file's (mtime, size) changes."""

    def __init__(self, path: str | Path | None) -> None:
        self._path = Path(path) if path is not None else None
        self._stamp: tuple[int, int] | None = None
        self._crl: x509.CertificateRevocationList | None = None
        self._lock = threading.Lock()

    @property
    def path(self) -> Path | None:
        return self._path

    def current(self) -> x509.CertificateRevocationList | None:
        if self._path is None:
            return None
        try:
            st = self._path.stat()
        except OSError:
            with self._lock:
                self._stamp = None
                self._crl = None
            return None
        stamp = (st.st_mtime_ns, st.st_size)
        with self._lock:
            if stamp != self._stamp:
                self._crl = decode_crl(self._path.read_bytes())
                self._stamp = stamp
            return self._crl

    def is_revoked(self, serial: int) -> bool:
        crl = self.current()
        if crl is None:
            return False
        return crl.get_revoked_certificate_by_serial_number(serial) is not None


@dataclass
class ServerSettings:
    """Deployment parameters, typically read from the options file."""

    keystore_filepath: str | None = None
    keystore_password: str | None = None
    ca_certificate_filepath: str | None = None
    ca_certificate_password: str | None = None  # accepted; PEM anchors need none
    listen_address: str = DEFAULT_LISTEN_ADDRESS
    listen_port: int = DEFAULT_LISTEN_PORT
    data_dir: Path = field(default_factory=lambda: Path("data"))
    crl_filepath: Path | None = None
    audit_log_filepath: Path | None = None
    webui_root: Path | None = None
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD_BYTES
    session_idle_seconds: int = DEFAULT_IDLE_SECONDS

    @classmethod
    def from_options(cls, opts: OptionsMap) -> "ServerSettings":
        def intval(key: str, default: int) -> int:
            raw = opts.get(key)
            if raw is None:
                return default
            try:
                return int(raw)
            except ValueError as exc:
                raise OptionsError(f"{key} must be an integer, got {raw!r}") from exc

        def pathval(key: str) -> Path | None:
            raw = opts.get(key)
            return Path(raw) if raw else None

        return cls(
            keystore_filepath=opts.get(KEY_KEYSTORE_FILEPATH),
            keystore_password=opts.get(KEY_KEYSTORE_PASSWORD),
            ca_certificate_filepath=opts.get(KEY_CA_CERTIFICATE_FILEPATH),
            ca_certificate_password=opts.get(KEY_CA_CERTIFICATE_PASSWORD),
            listen_address=opts.get(KEY_LISTEN_ADDRESS) or DEFAULT_LISTEN_ADDRESS,
            listen_port=intval(KEY_LISTEN_PORT, DEFAULT_LISTEN_PORT),
            data_dir=pathval(KEY_DATA_DIR) or Path("data"),
            crl_filepath=pathval(KEY_CRL_FILEPATH),
            audit_log_filepath=pathval(KEY_AUDIT_LOG_FILEPATH),
            webui_root=pathval(KEY_WEBUI_ROOT),
            max_upload_bytes=intval(KEY_MAX_UPLOAD_BYTES, DEFAULT_MAX_UPLOAD_BYTES),
            session_idle_seconds=intval(KEY_SESSION_IDLE_SECONDS, DEFAULT_IDLE_SECONDS),
        )


@dataclass
class AppState:
    """Shared service state handed to every request handler."""

    directory: Directory
    filestore: Filestore
    audit_log: AuditLog
    sessions: SessionTable
    root_certificate: x509.Certificate
    crl_cache: CrlCache
    webui_root: Path | None = None

    def audit(
        self,
        principal: str,
        operation: Operation,
        target: str = "",
        outcome: Outcome = Outcome.SUCCESS,
        detail: str = "",
    ) -> None:
        event = make_event(principal, operation, target, outcome, detail)
        try:
            self.audit_log.record(event)
        except AuditStorageError as exc:
            # Serving must not fail because the log is unwritable.
            print(f"audit write failed ({exc}): {format_line(event)}", file=sys.stderr)


def _unmatchable_password_hash() -> str:
    # For accounts created by certificate binding: no password is known,
    # so login stays impossible until an administrator sets one.
    return ssha_hash(secrets.token_urlsafe(32), secrets.token_bytes(8))


def build_state(settings: ServerSettings) -> AppState:
    """Open all persistent stores named by the settings."""
    if not settings.ca_certificate_filepath:
        raise OptionsError("ca_certificate_filepath is required")
    root = decode_certificate(Path(settings.ca_certificate_filepath).read_bytes())
    data_dir = settings.data_dir
    data_dir.mkdir(parents=True, exist_ok=True)
    return AppState(
        directory=Directory(data_dir / "users.ldif"),
        filestore=Filestore(
            db_path=data_dir / "filestore.db", max_upload_bytes=settings.max_upload_bytes
        ),
        audit_log=AuditLog(settings.audit_log_filepath or data_dir / "audit.log"),
        sessions=SessionTable(idle_seconds=settings.session_idle_seconds),
        root_certificate=root,
        crl_cache=CrlCache(settings.crl_filepath),
        webui_root=settings.webui_root,
    )


def create_app(state: AppState) -> FastAPI:
    """Build the FastAPI application over the given state."""
    app = FastAPI(
        title="Secure File Exchange Service",
        openapi_url=None,
        docs_url=None,
        redoc_url=None,
    )
    app.state.sfs = state

    # -- auth plumbing ----------------------------------------------------

    def bearer_token(request: Request) -> str | None:
        header = request.headers.get("authorization", "")
        scheme, _, token = header.partition(" ")
        if scheme.lower() != "bearer" or not token:
            return None
        return token.strip()

    def authenticate(request: Request, operation: Operation, target: str = "") -> Session:
        """Resolve the session or audit a denial and raise 401."""

        def deny(detail: str, principal: str = ANONYMOUS) -> HTTPException:
            state.audit(principal, operation, target, Outcome.DENIED, detail)
            return HTTPException(status_code=401, detail="authentication required")

        der = client_cert_from_scope(request.scope)
        if der is None:
            raise deny("no client certificate on connection")
        token = bearer_token(request)
        if token is None:
            raise deny("missing bearer token")
        session = state.sessions.validate(token, certificate_fingerprint(der))
        if session is None:
            raise deny("invalid, expired, or wrong-certificate session")
        try:
            cert = decode_certificate(der)
        except CertificateFormatError:
            raise deny("undecodable client certificate", principal=session.uid)
        if state.crl_cache.is_revoked(cert.serial_number):
            raise deny("client certificate revoked", principal=session.uid)
        return session

    def require_admin(session: Session, operation: Operation, target: str = "") -> None:
        if session.role is not Role.ADMINISTRATOR:
            state.audit(
                session.uid, operation, target, Outcome.DENIED, "administrator role required"
            )
            raise HTTPException(status_code=403, detail="forbidden")

    def error(
        session: Session,
        operation: Operation,
        target: str,
        status: int,
        detail: str,
    ) -> HTTPException:
        state.audit(session.uid, operation, target, Outcome.ERROR, detail)
        return HTTPException(status_code=status, detail=detail)

    def denied(
        session: Session, operation: Operation, target: str, detail: str
    ) -> HTTPException:
        state.audit(session.uid, operation, target, Outcome.DENIED, detail)
        return HTTPException(status_code=403, detail="forbidden")

    def file_entry(record: FileRecord, rights: frozenset[Right]) -> FileEntry:
        return FileEntry(
            file_id=record.file_id,
            name=record.name,
            owner_uid=record.owner_uid,
            size_bytes=record.size_bytes,
            uploaded_at=record.uploaded_at,
            rights=rights_to_list(rights),
        )

    # -- pages ------------------------------------------------------------

    @app.get("/sfs/")
    def index() -> RedirectResponse:
        return RedirectResponse(url="/sfs/login", status_code=302)

    @app.get("/sfs/login")
    def login_page() -> Response:
        if state.webui_root is not None:
            index_html = state.webui_root / "index.html"
            if index_html.is_file():
                return FileResponse(index_html, media_type="text/html")
        return HTMLResponse(_LOGIN_PAGE)

    if state.webui_root is not None and state.webui_root.is_dir():
        app.mount("/sfs/assets", StaticFiles(directory=state.webui_root), name="assets")

    # -- session lifecycle ------------------------------------------------

    @app.post("/sfs/api/login", response_model=LoginResponse)
    def login(request: Request, username: str = Form(""), password: str = Form("")) -> LoginResponse:
        principal = username or ANONYMOUS

        def fail(detail: str) -> HTTPException:
            state.audit(principal, Operation.LOGIN, "", Outcome.DENIED, detail)
            return HTTPException(status_code=401, detail=GENERIC_LOGIN_FAILURE)

        der = client_cert_from_scope(request.scope)
        if der is None:
            raise fail("no client certificate on connection")
        try:
            cert = decode_certificate(der)
        except CertificateFormatError:
            raise fail("undecodable client certificate")
        verdict = verify_chain(cert, state.root_certificate, state.crl_cache.current())
        if verdict is not Verdict.VALID:
            raise fail(f"client certificate {verdict.value}")
        if subject_common_name(cert) != username:
            raise fail("certificate CN does not match username")
        try:
            stored = state.directory.get_credentials(username)
        except NotFoundError:
            raise fail("unknown uid")
        if not credentials_match(username, password, der, stored):
            if not ssha_verify(password, stored.password_hash):
                raise fail("wrong password")
            raise fail("presented certificate does not match bound certificate")
        try:
            user = state.filestore.get_user(username)
        except NotFoundError:
            raise fail("no account record")
        session = state.sessions.create(username, user.role, certificate_fingerprint(der))
        state.audit(username, Operation.LOGIN, "", Outcome.SUCCESS, "")
        return LoginResponse(token=session.token, uid=session.uid, role=session.role.value)

    @app.post("/sfs/api/logout", response_model=OkResponse)
    def logout(request: Request) -> OkResponse:
        session = authenticate(request, Operation.LOGOUT)
        state.sessions.drop(session.token)
        state.audit(session.uid, Operation.LOGOUT, "", Outcome.SUCCESS, "")
        return OkResponse()

    # -- files ------------------------------------------------------------

    @app.get("/sfs/api/files", response_model=FileListResponse)
    def list_files(request: Request) -> FileListResponse:
        session = authenticate(request, Operation.LIST)
        listing = state.filestore.list_files_for(session.uid)
        state.audit(session.uid, Operation.LIST, "", Outcome.SUCCESS, "files")
        return FileListResponse(files=[file_entry(rec, rights) for rec, rights in listing])

    @app.get("/sfs/api/files/{file_id}")
    def download(request: Request, file_id: int) -> Response:
        target = str(file_id)
        session = authenticate(request, Operation.DOWNLOAD, target)
        try:
            rights = state.filestore.effective_rights(session.uid, file_id)
        except NotFoundError:
            raise error(session, Operation.DOWNLOAD, target, 404, "no such file")
        if Right.DOWNLOAD not in rights:
            raise denied(session, Operation.DOWNLOAD, target, "download right missing")
        record = state.filestore.get_file(file_id)
        content = state.filestore.fetch_content(file_id)
        state.audit(session.uid, Operation.DOWNLOAD, target, Outcome.SUCCESS, record.name)
        filename = record.name.replace('"', "").replace("\r", " ").replace("\n", " ")
        return Response(
            content=content,
            media_type="application/octet-stream",
            headers={"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    @app.post("/sfs/api/files", response_model=FileEntry)
    async def upload(request: Request, file: UploadFile) -> FileEntry:
        session = authenticate(request, Operation.UPLOAD)
        content = await file.read()
        name = file.filename or "unnamed"
        try:
            record = state.filestore.store_file(session.uid, name, content)
        except TooLargeError as exc:
            raise error(session, Operation.UPLOAD, "", 413, str(exc))
        state.audit(session.uid, Operation.UPLOAD, str(record.file_id), Outcome.SUCCESS, name)
        return file_entry(record, FULL_RIGHTS)

    @app.delete("/sfs/api/files/{file_id}", response_model=OkResponse)
    def delete_file(request: Request, file_id: int) -> OkResponse:
        target = str(file_id)
        session = authenticate(request, Operation.DELETE_FILE, target)
        try:
            rights = state.filestore.effective_rights(session.uid, file_id)
        except NotFoundError:
            raise error(session, Operation.DELETE_FILE, target, 404, "no such file")
        if Right.DELETE not in rights:
            raise denied(session, Operation.DELETE_FILE, target, "delete right missing")
        state.filestore.delete_file(file_id)
        state.audit(session.uid, Operation.DELETE_FILE, target, Outcome.SUCCESS, "")
        return OkResponse()

    # -- ACLs -------------------------------------------------------------

    def _require_acl_authority(
        session: Session, file_id: int, operation: Operation
    ) -> FileRecord:
        target = str(file_id)
        try:
            record = state.filestore.get_file(file_id)
        except NotFoundError:
            raise error(session, operation, target, 404, "no such file")
        if session.role is not Role.ADMINISTRATOR and record.owner_uid != session.uid:
            raise denied(session, operation, target, "not owner or administrator")
        return record

    @app.get("/sfs/api/files/{file_id}/acl", response_model=AclResponse)
    def read_acl(request: Request, file_id: int) -> AclResponse:
        target = str(file_id)
        session = authenticate(request, Operation.LIST, target)
        _require_acl_authority(session, file_id, Operation.LIST)
        grants = state.filestore.grants_for_file(file_id)
        state.audit(session.uid, Operation.LIST, target, Outcome.SUCCESS, "acl")
        return AclResponse(
            file_id=file_id,
            grants=[
                AclGrant(group_id=gid, rights=rights_to_list(rights))
                for gid, rights in sorted(grants.items())
            ],
        )

    @app.put("/sfs/api/files/{file_id}/acl", response_model=OkResponse)
    def set_acl(request: Request, file_id: int, update: AclUpdate) -> OkResponse:
        target = str(file_id)
        session = authenticate(request, Operation.ACL_CHANGE, target)
        _require_acl_authority(session, file_id, Operation.ACL_CHANGE)
        try:
            new_grants = {g.group_id: list_to_rights(g.rights) for g in update.grants}
        except ValueError as exc:
            raise error(session, Operation.ACL_CHANGE, target, 400, f"unknown right: {exc}")
        for gid in new_grants:
            try:
                state.filestore.get_group(gid)
            except NotFoundError:
                raise error(session, Operation.ACL_CHANGE, target, 404, f"no such group {gid}")
        # Replace wholesale: clear every existing grant, then apply the new set.
        for gid in state.filestore.grants_for_file(file_id):
            state.filestore.grant(gid, file_id, frozenset())
        for gid, rights in new_grants.items():
            state.filestore.grant(gid, file_id, rights)
        state.audit(session.uid, Operation.ACL_CHANGE, target, Outcome.SUCCESS, "")
        return OkResponse()

    # -- admin: users -----------------------------------------------------

    @app.get("/sfs/api/admin/users", response_model=UserListResponse)
    def admin_list_users(request: Request) -> UserListResponse:
        session = authenticate(request, Operation.LIST)
        require_admin(session, Operation.LIST)
        entries = []
        for user in state.filestore.list_users():
            try:
                has_cert = state.directory.get_credentials(user.uid).certificate is not None
            except NotFoundError:
                has_cert = False
            entries.append(
                UserEntry(uid=user.uid, role=user.role.value, has_certificate=has_cert)
            )
        state.audit(session.uid, Operation.LIST, "", Outcome.SUCCESS, "users")
        return UserListResponse(users=entries)

    @app.post("/sfs/api/admin/users", response_model=UserEntry)
    def admin_add_user(request: Request, body: UserAddRequest) -> UserEntry:
        session = authenticate(request, Operation.USER_ADD, body.uid)
        require_admin(session, Operation.USER_ADD, body.uid)
        try:
            role = Role(body.role)
        except ValueError:
            raise error(session, Operation.USER_ADD, body.uid, 400, f"unknown role {body.role!r}")
        if body.uid in state.directory or state.filestore.has_user(body.uid):
            raise error(session, Operation.USER_ADD, body.uid, 409, "user already exists")
        creds = make_credentials(body.uid, body.password)
        state.directory.add_user(DirectoryEntry(uid=body.uid, user_password=creds.password_hash))
        state.filestore.create_user(body.uid, role)
        state.audit(session.uid, Operation.USER_ADD, body.uid, Outcome.SUCCESS, role.value)
        return UserEntry(uid=body.uid, role=role.value, has_certificate=False)

    @app.put("/sfs/api/admin/users/{uid}", response_model=OkResponse)
    def admin_modify_user(request: Request, uid: str, body: UserModifyRequest) -> OkResponse:
        session = authenticate(request, Operation.USER_MODIFY, uid)
        require_admin(session, Operation.USER_MODIFY, uid)
        if body.password is None and body.role is None:
            raise error(session, Operation.USER_MODIFY, uid, 400, "nothing to modify")
        try:
            state.filestore.get_user(uid)
        except NotFoundError:
            raise error(session, Operation.USER_MODIFY, uid, 404, "no such user")
        changed = []
        if body.role is not None:
            try:
                state.filestore.set_role(uid, Role(body.role))
            except ValueError:
                raise error(session, Operation.USER_MODIFY, uid, 400, f"unknown role {body.role!r}")
            changed.append("role")
        if body.password is not None:
            state.directory.set_password(uid, make_credentials(uid, body.password).password_hash)
            changed.append("password")
        state.audit(session.uid, Operation.USER_MODIFY, uid, Outcome.SUCCESS, ",".join(changed))
        return OkResponse()

    @app.delete("/sfs/api/admin/users/{uid}", response_model=OkResponse)
    def admin_delete_user(request: Request, uid: str) -> OkResponse:
        session = authenticate(request, Operation.USER_DELETE, uid)
        require_admin(session, Operation.USER_DELETE, uid)
        try:
            state.filestore.delete_user(uid)
        except OwnershipConflictError as exc:
            raise error(session, Operation.USER_DELETE, uid, 409, str(exc))
        except NotFoundError:
            raise error(session, Operation.USER_DELETE, uid, 404, "no such user")
        try:
            state.directory.delete_user(uid)
        except NotFoundError:
            pass
        state.audit(session.uid, Operation.USER_DELETE, uid, Outcome.SUCCESS, "")
        return OkResponse()

    # -- admin: groups ----------------------------------------------------

    @app.get("/sfs/api/admin/groups", response_model=GroupListResponse)
    def admin_list_groups(request: Request) -> GroupListResponse:
        session = authenticate(request, Operation.LIST)
        require_admin(session, Operation.LIST)
        groups = [
            GroupEntry(group_id=g.group_id, name=g.name, members=sorted(g.members))
            for g in state.filestore.list_groups()
        ]
        state.audit(session.uid, Operation.LIST, "", Outcome.SUCCESS, "groups")
        return GroupListResponse(groups=groups)

    @app.post("/sfs/api/admin/groups", response_model=GroupEntry)
    def admin_create_group(request: Request, body: GroupCreateRequest) -> GroupEntry:
        session = authenticate(request, Operation.GROUP_CHANGE, body.name)
        require_admin(session, Operation.GROUP_CHANGE, body.name)
        try:
            group = state.filestore.create_group(body.name)
        except ConflictError:
            raise error(session, Operation.GROUP_CHANGE, body.name, 409, "group already exists")
        state.audit(
            session.uid, Operation.GROUP_CHANGE, str(group.group_id), Outcome.SUCCESS, "create"
        )
        return GroupEntry(group_id=group.group_id, name=group.name, members=[])

    @app.delete("/sfs/api/admin/groups/{group_id}", response_model=OkResponse)
    def admin_delete_group(request: Request, group_id: int) -> OkResponse:
        target = str(group_id)
        session = authenticate(request, Operation.GROUP_CHANGE, target)
        require_admin(session, Operation.GROUP_CHANGE, target)
        try:
            state.filestore.delete_group(group_id)
        except NotFoundError:
            raise error(session, Operation.GROUP_CHANGE, target, 404, "no such group")
        state.audit(session.uid, Operation.GROUP_CHANGE, target, Outcome.SUCCESS, "delete")
        return OkResponse()

    @app.put("/sfs/api/admin/groups/{group_id}/members", response_model=OkResponse)
    def admin_add_member(request: Request, group_id: int, body: MemberRequest) -> OkResponse:
        target = str(group_id)
        session = authenticate(request, Operation.GROUP_CHANGE, target)
        require_admin(session, Operation.GROUP_CHANGE, target)
        try:
            state.filestore.add_member(group_id, body.uid)
        except NotFoundError as exc:
            raise error(session, Operation.GROUP_CHANGE, target, 404, str(exc))
        state.audit(
            session.uid, Operation.GROUP_CHANGE, target, Outcome.SUCCESS, f"add_member {body.uid}"
        )
        return OkResponse()

    @app.delete("/sfs/api/admin/groups/{group_id}/members/{uid}", response_model=OkResponse)
    def admin_remove_member(request: Request, group_id: int, uid: str) -> OkResponse:
        target = str(group_id)
        session = authenticate(request, Operation.GROUP_CHANGE, target)
        require_admin(session, Operation.GROUP_CHANGE, target)
        try:
            state.filestore.remove_member(group_id, uid)
        except NotFoundError as exc:
            raise error(session, Operation.GROUP_CHANGE, target, 404, str(exc))
        state.audit(
            session.uid, Operation.GROUP_CHANGE, target, Outcome.SUCCESS, f"remove_member {uid}"
        )
        return OkResponse()

    # -- admin: certificates ----------------------------------------------

    @app.post("/sfs/api/admin/certificates", response_model=CertBindResponse)
    async def admin_bind_certificate(request: Request, certificate: UploadFile) -> CertBindResponse:
        session = authenticate(request, Operation.CERT_BIND)
        require_admin(session, Operation.CERT_BIND)
        blob = await certificate.read()
        try:
            cert = decode_certificate(blob)
        except CertificateFormatError:
            raise error(session, Operation.CERT_BIND, "", 400, "undecodable certificate")
        verdict = verify_chain(cert, state.root_certificate, state.crl_cache.current())
        if verdict is not Verdict.VALID:
            raise error(
                session, Operation.CERT_BIND, "", 400, f"certificate {verdict.value}"
            )
        uid = subject_common_name(cert)
        if not uid:
            raise error(session, Operation.CERT_BIND, "", 400, "certificate has no subject CN")
        der = encode_certificate(cert, "DER")
        created = False
        if not state.filestore.has_user(uid):
            state.filestore.create_user(uid, Role.NORMAL)
            created = True
        if uid not in state.directory:
            state.directory.add_user(
                DirectoryEntry(uid=uid, user_password=_unmatchable_password_hash())
            )
        state.directory.set_certificate(uid, der)
        state.audit(
            session.uid,
            Operation.CERT_BIND,
            uid,
            Outcome.SUCCESS,
            "created user" if created else "",
        )
        return CertBindResponse(uid=uid, created=created)

    @app.delete("/sfs/api/admin/certificates/{uid}", response_model=OkResponse)
    def admin_unbind_certificate(request: Request, uid: str) -> OkResponse:
        session = authenticate(request, Operation.CERT_UNBIND, uid)
        require_admin(session, Operation.CERT_UNBIND, uid)
        try:
            state.directory.set_certificate(uid, None)
        except NotFoundError:
            raise error(session, Operation.CERT_UNBIND, uid, 404, "no such user")
        state.audit(session.uid, Operation.CERT_UNBIND, uid, Outcome.SUCCESS, "")
        return OkResponse()

    return app


def serve(settings: ServerSettings) -> None:
    """Run the HTTPS listener until interrupted (blocking)."""
    if not settings.keystore_filepath:
        raise OptionsError("keystore_filepath is required to serve")
    if not settings.ca_certificate_filepath:
        raise OptionsError("ca_certificate_filepath is required to serve")
    state = build_state(settings)
    app = create_app(state)
    config = uvicorn.Config(
        app,
        host=settings.listen_address,
        port=settings.listen_port,
        log_level="info",
        **uvicorn_tls_kwargs(
            settings.keystore_filepath,
            settings.keystore_password,
            settings.ca_certificate_filepath,
        ),
    )
    uvicorn.Server(config).run()
