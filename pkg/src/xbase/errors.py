"""Error taxonomy shared by every component.

Each failure is reported as exactly one :class:`ErrorKind`.  The enum order is
significant: it fixes both the CLI exit codes (10..21) and the status bytes of
the network protocol (1..12).
"""
from __future__ import annotations

import enum


class ErrorKind(enum.IntEnum):
    StoreNotFound = 1
    StoreExists = 2
    DaemonError = 3
    IllegalKey = 4
    CannotCreateStore = 5
    KeyNotFound = 6
    KeyExists = 7
    ReflectError = 8
    ReifyError = 9
    InterpretationError = 10
    NameNotFound = 11
    RootStabilisationError = 12

    @property
    def exit_code(self) -> int:
        return 9 + int(self)


class XBaseError(Exception):
    """Base class; ``kind`` names the failure."""

    kind: ErrorKind

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.kind.name}: {msg}" if msg else self.kind.name


class StoreNotFound(XBaseError):
    kind = ErrorKind.StoreNotFound


class StoreExists(XBaseError):
    kind = ErrorKind.StoreExists


class DaemonError(XBaseError):
    kind = ErrorKind.DaemonError


class IllegalKey(XBaseError):
    kind = ErrorKind.IllegalKey


class CannotCreateStore(XBaseError):
    kind = ErrorKind.CannotCreateStore


class KeyNotFound(XBaseError):
    kind = ErrorKind.KeyNotFound


class KeyExists(XBaseError):
    """Raised by ``put`` for content that is already stored.

    The existing key is kept on the exception so callers treating the
    duplicate as a dedup signal can carry on with it.
    """

    kind = ErrorKind.KeyExists

    def __init__(self, key, message: str = "") -> None:
        super().__init__(message or f"already a binding for {key}")
        self.key = key


class ReflectError(XBaseError):
    kind = ErrorKind.ReflectError


class ReifyError(XBaseError):
    kind = ErrorKind.ReifyError


class InterpretationError(XBaseError):
    kind = ErrorKind.InterpretationError


class NameNotFound(XBaseError):
    kind = ErrorKind.NameNotFound


class RootStabilisationError(XBaseError):
    kind = ErrorKind.RootStabilisationError


ERROR_CLASSES: dict[ErrorKind, type[XBaseError]] = {
    cls.kind: cls
    for cls in (
        StoreNotFound, StoreExists, DaemonError, IllegalKey, CannotCreateStore,
        KeyNotFound, KeyExists, ReflectError, ReifyError, InterpretationError,
        NameNotFound, RootStabilisationError,
    )
}


def error_for(kind: ErrorKind, message: str = "") -> XBaseError:
    """Build the exception instance for ``kind`` (used when decoding wire statuses)."""
    if kind is ErrorKind.KeyExists:
        from xbase.core import parse_key

        return KeyExists(parse_key(message))
    return ERROR_CLASSES[kind](message)
