"""Secure file service: mutual-TLS file exchange with an internal CA.

The package is organized around the deployment's moving parts:

* :mod:`sfs.config` -- ``.config`` options file loading.
* :mod:`sfs.credentials` -- salted-SHA1 (``{SSHA}``) password hashing.
* :mod:`sfs.ca` -- internal certificate authority (issuance, revocation,
  chain verification).
* :mod:`sfs.directory` -- LDIF-backed user credential directory.
* :mod:`sfs.filestore` -- users, groups, files, and group-grant ACLs.
* :mod:`sfs.audit` -- append-only audit trail.
* :mod:`sfs.server` -- the HTTPS single access point (FastAPI).
* :mod:`sfs.cli` -- operator command line (CA lifecycle, bootstrap, serve).
"""

__version__ = "0.1.0"
