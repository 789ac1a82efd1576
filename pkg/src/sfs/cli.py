"""Operator command line.

Subcommands::

    sfs ca init --cn <name> --days <n> --dir <path>
    sfs ca issue --cn <name> --kind server|client --days <n> --dir <path> --out <path>
    sfs ca revoke --serial <n> --dir <path> [--config <path>]
    sfs ca show-crl --dir <path>
    sfs bootstrap-admin --uid <name> --password-prompt --config <path>
    sfs serve [--config <path>]

Exit codes: 0 success, 1 operation failure, 2 usage error.  Results go
to stdout and errors to stderr.  Private keys are never printed; ``ca
issue`` writes the certificate and key PEM into the ``--out`` file with
owner-only permissions.  CA mutations take an exclusive lock on the CA
directory so concurrent invocations cannot interleave.
"""
from __future__ import annotations

import argparse
import getpass
import os
import sys
from pathlib import Path

from filelock import Timeout

from .audit import AuditLog, Operation, Outcome, make_event
from .ca import (
    CaDirectory,
    CertKind,
    encode_certificate,
    encode_private_key,
    issue_certificate,
    revoke_certificate,
)
from .config import DEFAULT_OPTIONS_FILENAME, read_options
from .credentials import make_credentials
from .directory import Directory, DirectoryEntry
from .errors import SfsError
from .filestore import Filestore, Role
from .server.app import ServerSettings, serve


def _ca_dir(args: argparse.Namespace) -> CaDirectory:
    return CaDirectory(args.dir)


def cmd_ca_init(args: argparse.Namespace) -> int:
    cadir = _ca_dir(args)
    with cadir.lock():
        cadir.initialize(args.cn, args.days)
    print(f"initialized CA '{args.cn}' in {cadir.path} (root certificate serial 1)")
    return 0


def cmd_ca_issue(args: argparse.Namespace) -> int:
    cadir = _ca_dir(args)
    out = Path(args.out)
    with cadir.lock():
        state = cadir.load()
        issued = issue_certificate(state, args.cn, CertKind(args.kind), args.days)
        cadir.save(state)
    pem = encode_certificate(issued.certificate, "PEM") + encode_private_key(issued.private_key)
    fd = os.open(out, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, pem)
    finally:
        os.close(fd)
    print(f"issued {args.kind} certificate serial {issued.serial} for CN '{args.cn}' to {out}")
    return 0


def cmd_ca_revoke(args: argparse.Namespace) -> int:
    cadir = _ca_dir(args)
    with cadir.lock():
        state = cadir.load()
        revoke_certificate(state, args.serial)
        cadir.save(state)
    print(f"revoked serial {args.serial}; CRL updated at {cadir.crl_path}")
    if args.config:
        # Revocation is a CLI step, but deployments still want it on the
        # audit trail; the config names the log file.
        settings = ServerSettings.from_options(read_options(args.config))
        log_path = settings.audit_log_filepath or settings.data_dir / "audit.log"
        AuditLog(log_path).record(
            make_event(
                "anonymous",
                Operation.CERT_REVOKE,
                str(args.serial),
                Outcome.SUCCESS,
                "revoked via command line",
            )
        )
    return 0


def cmd_ca_show_crl(args: argparse.Namespace) -> int:
    cadir = _ca_dir(args)
    crl = cadir.load_crl()
    print(f"issuer: {crl.issuer.rfc4514_string()}")
    print(f"last update: {crl.last_update_utc.isoformat()}")
    print(f"next update: {crl.next_update_utc.isoformat()}")
    entries = list(crl)
    if not entries:
        print("revoked serials: none")
    else:
        print("revoked serials:")
        for entry in sorted(entries, key=lambda e: e.serial_number):
            print(f"  {entry.serial_number}  {entry.revocation_date_utc.isoformat()}")
    return 0


def cmd_bootstrap_admin(args: argparse.Namespace) -> int:
    settings = ServerSettings.from_options(read_options(args.config))
    password = getpass.getpass(f"Password for {args.uid}: ")
    confirm = getpass.getpass("Repeat password: ")
    if password != confirm:
        print("error: passwords do not match", file=sys.stderr)
        return 1
    if not password:
        print("error: password must be non-empty", file=sys.stderr)
        return 1
    data_dir = settings.data_dir
    data_dir.mkdir(parents=True, exist_ok=True)
    directory = Directory(data_dir / "users.ldif")
    filestore = Filestore(db_path=data_dir / "filestore.db")
    creds = make_credentials(args.uid, password)
    directory.add_user(DirectoryEntry(uid=args.uid, user_password=creds.password_hash))
    filestore.create_user(args.uid, Role.ADMINISTRATOR)
    print(f"created administrator '{args.uid}'")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    settings = ServerSettings.from_options(
        read_options(args.config if args.config else DEFAULT_OPTIONS_FILENAME)
    )
    serve(settings)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfs", description="Secure file exchange service operator tool."
    )
    sub = parser.add_subparsers(dest="command")

    ca = sub.add_parser("ca", help="certificate authority operations")
    casub = ca.add_subparsers(dest="ca_command")

    p = casub.add_parser("init", help="create a new CA")
    p.add_argument("--cn", required=True, help="root certificate common name")
    p.add_argument("--days", type=int, default=3650, help="root validity in days")
    p.add_argument("--dir", required=True, help="CA directory to create")
    p.set_defaults(func=cmd_ca_init)

    p = casub.add_parser("issue", help="issue a server or client certificate")
    p.add_argument("--cn", required=True, help="subject common name")
    p.add_argument("--kind", required=True, choices=["server", "client"])
    p.add_argument("--days", type=int, default=365, help="validity in days")
    p.add_argument("--dir", required=True, help="CA directory")
    p.add_argument("--out", required=True, help="write certificate + key PEM here (mode 0600)")
    p.set_defaults(func=cmd_ca_issue)

    p = casub.add_parser("revoke", help="revoke an issued certificate")
    p.add_argument("--serial", required=True, type=int)
    p.add_argument("--dir", required=True, help="CA directory")
    p.add_argument("--config", help="options file; when given, the revocation is audited")
    p.set_defaults(func=cmd_ca_revoke)

    p = casub.add_parser("show-crl", help="print the current revocation list")
    p.add_argument("--dir", required=True, help="CA directory")
    p.set_defaults(func=cmd_ca_show_crl)

    p = sub.add_parser("bootstrap-admin", help="create the first administrator account")
    p.add_argument("--uid", required=True)
    p.add_argument(
        "--password-prompt",
        action="store_true",
        required=True,
        help="read the password interactively (passwords are never taken as flags)",
    )
    p.add_argument("--config", required=True, help="options file naming the data directory")
    p.set_defaults(func=cmd_bootstrap_admin)

    p = sub.add_parser("serve", help="run the HTTPS service")
    p.add_argument("--config", help=f"options file (default ./{DEFAULT_OPTIONS_FILENAME})")
    p.set_defaults(func=cmd_serve)

    return parser


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except Timeout:
        print("error: CA directory is locked by another process", file=sys.stderr)
        return 1
    except SfsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
