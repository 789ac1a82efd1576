"""Exception hierarchy shared across the service modules."""


class SfsError(Exception):
    """Base class for all errors raised by this package."""


class NotFoundError(SfsError):
    """A referenced entity (user, group, file, serial) does not exist."""


class ConflictError(SfsError):
    """The operation collides with existing state (duplicate id, re-init)."""


class OwnershipConflictError(ConflictError):
    """A user cannot be deleted while still owning files."""


class TooLargeError(SfsError):
    """Uploaded content exceeds the configured maximum size."""


class FormatError(SfsError):
    """External input (SSHA string, LDIF, PEM/DER, options file) is malformed."""
