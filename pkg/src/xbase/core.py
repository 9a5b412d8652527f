"""Value types, key derivation and the component contracts.

Everything exchanged between components is a ``BitString``; in Python that is
simply :class:`bytes`.  Keys are SHA-256 digests of the stored bytes.
"""
from __future__ import annotations

import abc
import hashlib
import re
import secrets
import threading
import time
from dataclasses import dataclass
from typing import NamedTuple, Union

from xbase.errors import IllegalKey

BitString = bytes
MAX_BITSTRING = 2**31 - 1

_HEX64 = re.compile(r"[0-9a-f]{64}\Z")
_HEX32 = re.compile(r"[0-9a-f]{32}\Z")
_CONTROL = re.compile(r"[\x00-\x1f\x7f]")


def as_bitstring(data: Union[bytes, bytearray, memoryview]) -> BitString:
    """Copy ``data`` into an immutable byte string, enforcing the size cap."""
    if isinstance(data, str):
        raise TypeError("BitString needs bytes, not str")
    b = bytes(data)
    if len(b) > MAX_BITSTRING:
        raise ValueError(f"BitString too large: {len(b)} bytes")
    return b


@dataclass(frozen=True)
class Key:
    """Content-derived store handle (32-byte digest)."""

    digest: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.digest, bytes) or len(self.digest) != 32:
            raise IllegalKey("a key digest is exactly 32 bytes")

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return self.digest.hex()

    def __repr__(self) -> str:
        return f"Key({self.digest.hex()[:12]}...)"


def derive_key(content: BitString) -> Key:
    return Key(hashlib.sha256(content).digest())


def render_key(key: Key) -> str:
    return key.hex


def parse_key(text: str) -> Key:
    """Parse the 64-lowercase-hex form; anything else is an :class:`IllegalKey`."""
    if not isinstance(text, str) or not _HEX64.match(text):
        raise IllegalKey(f"not a 64-hex key: {text!r}")
    return Key(bytes.fromhex(text))


def check_name(value: str) -> str:
    """Validate a Name: non-empty text without control characters."""
    if not isinstance(value, str) or not value:
        raise ValueError("a name is a non-empty string")
    if _CONTROL.search(value):
        raise ValueError(f"control character in name {value!r}")
    return value


def new_store_id() -> str:
    return secrets.token_hex(16)


def is_store_id(text: str) -> bool:
    return isinstance(text, str) and bool(_HEX32.match(text))


class VersionTuple(NamedTuple):
    name: str
    timestamp: int  # ms since the Unix epoch, UTC
    seq: int

    @property
    def order(self) -> tuple[int, int]:
        return (self.timestamp, self.seq)


class _VersionClock:
    # seq is process-global, so (timestamp, seq) is strictly increasing
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._last_ms = 0
        self._seq = 0

    def stamp(self) -> tuple[int, int]:
        with self._lock:
            now = max(int(time.time() * 1000), self._last_ms)
            self._last_ms = now
            self._seq += 1
            return now, self._seq

    def observe(self, timestamp: int, seq: int) -> None:
        # versions read back from a representation must not outrank new ones
        with self._lock:
            self._last_ms = max(self._last_ms, timestamp)
            self._seq = max(self._seq, seq)


_clock = _VersionClock()


def observe_version(vt: VersionTuple) -> None:
    _clock.observe(vt.timestamp, vt.seq)


def new_version(name: str) -> VersionTuple:
    ts, seq = _clock.stamp()
    return VersionTuple(check_name(name), ts, seq)


class Store(abc.ABC):
    """Append-only one-one map from keys to bitstrings."""

    store_id: str
    shareable: bool = False

    @abc.abstractmethod
    def put(self, content: BitString) -> Key:
        """Append ``content``; raise :class:`KeyExists` if it is already held."""

    @abc.abstractmethod
    def get(self, key: Key) -> BitString:
        """Return the bytes stored under ``key`` or raise :class:`KeyNotFound`."""

    def get_store_id(self) -> BitString:
        return self.store_id.encode("utf-8")

    def set_shareable(self, flag: bool) -> None:
        self.shareable = bool(flag)

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class Caster(abc.ABC):
    """Translates between an entity and its representation."""

    @abc.abstractmethod
    def reify(self, entity) -> BitString: ...

    @abc.abstractmethod
    def reflect(self, rep: BitString): ...


class Interpreter(abc.ABC):
    """BitString to BitString transformation (encryption, compression, ...)."""

    @abc.abstractmethod
    def interpret(self, rep: BitString) -> BitString: ...

    def __call__(self, rep: BitString) -> BitString:
        return self.interpret(rep)
