"""Shared exception types, mapped to distinct CLI exit codes."""


class CfiforgeError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class InputError(CfiforgeError):
    """Malformed input: bad flags, bad JSON, out-of-range values."""

    exit_code = 2


class CapExceeded(CfiforgeError):
    """A configured resource cap would be exceeded."""

    exit_code = 3


class ConsistencyError(CfiforgeError):
    """An internal cross-check failed; signals a malformed input or a bug."""

    exit_code = 1
