"""Concrete store styles and the store factory.

Three styles exist:

* ``file-per-blob`` -- one file per bitstring, named by the key hex, spread
  round-robin over one or more backing directories;
* ``single-file`` -- an append-only record log
  ``[key:32][len:4, big-endian][bytes]`` indexed in memory at open;
* ``proxy`` -- forwards to an ordered list of targets, which are either store
  objects in this process or remote daemons addressed by URL.
"""
from __future__ import annotations

import logging
import os
import struct
import tempfile
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union
from urllib.parse import unquote, urlsplit

from xbase import netd
from xbase.core import (
    BitString,
    Key,
    Store,
    as_bitstring,
    derive_key,
    is_store_id,
    new_store_id,
    parse_key,
)
from xbase.errors import (
    CannotCreateStore,
    DaemonError,
    IllegalKey,
    KeyExists,
    KeyNotFound,
    StoreExists,
    StoreNotFound,
)

log = logging.getLogger(__name__)

ID_FILE = "xbase-store-id"
LOG_FILE = "xbase-store.dat"
DEFAULT_HOPS = 8

STYLES = ("file-per-blob", "single-file", "proxy")


def path_to_url(path: Union[str, os.PathLike]) -> str:
    return Path(path).resolve().as_uri()


def url_to_path(url: str) -> Path:
    parts = urlsplit(url)
    if parts.scheme not in ("file", ""):
        raise ValueError(f"not a file URL: {url}")
    return Path(unquote(parts.path) if parts.scheme else url)


@dataclass
class BackingStorageDetails:
    url: str
    files: list[str] = field(default_factory=list)

    @property
    def path(self) -> Path:
        return url_to_path(self.url)


@dataclass(frozen=True)
class RemoteTarget:
    """``http://host:port[/store-id]``; no path means every shareable store on the host."""

    url: str

    def __post_init__(self) -> None:
        parts = urlsplit(self.url)
        if parts.scheme != "http" or not parts.hostname:
            raise ValueError(f"remote targets look like http://host:port, got {self.url!r}")
        sid = parts.path.strip("/")
        if sid and not is_store_id(sid):
            raise ValueError(f"bad store id in target URL {self.url!r}")

    @property
    def host(self) -> str:
        return urlsplit(self.url).hostname

    @property
    def port(self) -> int:
        return urlsplit(self.url).port or netd.DEFAULT_PORT

    @property
    def store_id(self) -> str:
        return urlsplit(self.url).path.strip("/")

    def __str__(self) -> str:
        return self.url


Target = Union[Store, RemoteTarget]


@dataclass
class StoreConfig:
    style: str
    shareable: bool = False
    backing: list[BackingStorageDetails] = field(default_factory=list)
    targets: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.style not in STYLES:
            raise ValueError(f"unknown store style {self.style!r}")
        if self.style == "proxy" and self.backing:
            raise ValueError("proxy stores have no backing storage")
        if self.style != "proxy" and not self.backing:
            raise ValueError("local stores need at least one backing location")

    @classmethod
    def local(cls, *dirs, shareable: bool = False, single_file: bool = False) -> "StoreConfig":
        return cls(
            "single-file" if single_file else "file-per-blob",
            shareable,
            [BackingStorageDetails(path_to_url(d)) for d in dirs],
        )

    @classmethod
    def proxy(cls, *targets, shareable: bool = False) -> "StoreConfig":
        return cls("proxy", shareable, targets=list(targets))


def _write_atomic(path: Path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_id(directory: Path) -> Optional[str]:
    try:
        text = (directory / ID_FILE).read_text().strip()
    except OSError:
        return None
    return text if is_store_id(text) else None


def _init_dirs(dirs: list[Path], store_id: str) -> None:
    for d in dirs:
        if (d / ID_FILE).exists():
            raise StoreExists(f"backing storage {d} already holds a store")
    for d in dirs:
        try:
            d.mkdir(parents=True, exist_ok=True)
            _write_atomic(d / ID_FILE, (store_id + "\n").encode())
        except OSError as exc:
            raise CannotCreateStore(f"cannot create backing storage {d}: {exc}") from exc


def _open_id(dirs: list[Path]) -> str:
    ids = [_read_id(d) for d in dirs]
    found = [i for i in ids if i]
    if not found:
        raise StoreNotFound(f"no store in {', '.join(map(str, dirs))}")
    if len(set(found)) > 1 or None in ids:
        raise StoreNotFound(f"backing locations do not belong to one store: {dirs}")
    return found[0]


class LocalStore(Store):
    style = "file-per-blob"

    def __init__(self, dirs: Iterable[Union[str, os.PathLike]], store_id: str, shareable: bool = False):
        self.dirs = [Path(d) for d in dirs]
        self.store_id = store_id
        self.shareable = bool(shareable)
        self._lock = threading.RLock()

    @classmethod
    def create(cls, *dirs, shareable: bool = False):
        if not dirs:
            raise CannotCreateStore("a local store needs a backing location")
        paths = [Path(d) for d in dirs]
        sid = new_store_id()
        _init_dirs(paths, sid)
        return cls(paths, sid, shareable)

    @classmethod
    def open(cls, *dirs, shareable: bool = False):
        paths = [Path(d) for d in dirs]
        return cls(paths, _open_id(paths), shareable)

    def keys(self) -> set[Key]:
        raise NotImplementedError

    def __contains__(self, key: Key) -> bool:
        try:
            self.get(key)
        except KeyNotFound:
            return False
        return True

    def backing(self) -> list[BackingStorageDetails]:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.store_id} {[str(d) for d in self.dirs]}>"


class FilePerBlobStore(LocalStore):
    """One file per blob; several backing directories filled round-robin."""

    style = "file-per-blob"

    def __init__(self, dirs, store_id, shareable=False):
        super().__init__(dirs, store_id, shareable)
        self._next = sum(len(self._files(d)) for d in self.dirs) % len(self.dirs)

    @staticmethod
    def _files(directory: Path) -> list[str]:
        try:
            names = os.listdir(directory)
        except FileNotFoundError:
            return []
        out = []
        for n in names:
            try:
                parse_key(n)
            except IllegalKey:
                continue
            out.append(n)
        return sorted(out)

    def put(self, content: BitString) -> Key:
        content = as_bitstring(content)
        key = derive_key(content)
        with self._lock:
            if any((d / key.hex).exists() for d in self.dirs):
                raise KeyExists(key)
            target = self.dirs[self._next]
            _write_atomic(target / key.hex, content)
            self._next = (self._next + 1) % len(self.dirs)
        return key

    def get(self, key: Key) -> BitString:
        for d in self.dirs:
            try:
                return (d / key.hex).read_bytes()
            except FileNotFoundError:
                continue
        raise KeyNotFound(f"no binding for {key.hex}")

    def keys(self) -> set[Key]:
        return {parse_key(n) for d in self.dirs for n in self._files(d)}

    def backing(self) -> list[BackingStorageDetails]:
        with self._lock:
            return [BackingStorageDetails(path_to_url(d), self._files(d)) for d in self.dirs]


_HEADER = struct.Struct(">32sI")


class SingleFileStore(LocalStore):
    """All blobs appended to one record file; the index is rebuilt at open."""

    style = "single-file"

    def __init__(self, dirs, store_id, shareable=False):
        super().__init__(dirs, store_id, shareable)
        if len(self.dirs) != 1:
            raise CannotCreateStore("a single-file store has exactly one backing location")
        self.path = self.dirs[0] / LOG_FILE
        self._index: dict[Key, tuple[int, int]] = {}
        self._order: list[Key] = []
        self.path.touch(exist_ok=True)
        self._scan()

    def _scan(self) -> None:
        with open(self.path, "rb") as fh:
            data = fh.read()
        pos = 0
        while pos + _HEADER.size <= len(data):
            digest, length = _HEADER.unpack_from(data, pos)
            start = pos + _HEADER.size
            if start + length > len(data):
                break
            key = Key(digest)
            if key not in self._index:
                self._order.append(key)
            self._index[key] = (start, length)
            pos = start + length
        if pos != len(data):
            log.warning("ignoring %d trailing bytes of a torn record in %s", len(data) - pos, self.path)
            with open(self.path, "r+b") as fh:
                fh.truncate(pos)

    def put(self, content: BitString) -> Key:
        content = as_bitstring(content)
        key = derive_key(content)
        with self._lock:
            if key in self._index:
                raise KeyExists(key)
            with open(self.path, "ab") as fh:
                offset = fh.tell()
                fh.write(_HEADER.pack(key.digest, len(content)) + content)
                fh.flush()
                os.fsync(fh.fileno())
            self._index[key] = (offset + _HEADER.size, len(content))
            self._order.append(key)
        return key

    def get(self, key: Key) -> BitString:
        with self._lock:
            loc = self._index.get(key)
        if loc is None:
            raise KeyNotFound(f"no binding for {key.hex}")
        start, length = loc
        with open(self.path, "rb") as fh:
            fh.seek(start)
            return fh.read(length)

    def keys(self) -> set[Key]:
        with self._lock:
            return set(self._index)

    def backing(self) -> list[BackingStorageDetails]:
        with self._lock:
            files = [k.hex for k in self._order]
        return [BackingStorageDetails(path_to_url(self.dirs[0]), files)]


class ProxyStore(Store):
    """A store that knows about other stores.

    ``get`` scans local targets in order, then remote ones; the first hit
    wins.  ``put`` goes to the first local target, or failing that to the
    first remote target that accepts it.  Every forwarded request carries a
    hop budget and a request id so that cyclic topologies terminate.
    """

    style = "proxy"

    def __init__(self, targets: Iterable = (), shareable: bool = False, store_id: Optional[str] = None):
        self.store_id = store_id or new_store_id()
        self.shareable = bool(shareable)
        self._targets: list[Target] = []
        self._lock = threading.Lock()
        for t in targets:
            self.add_target(t)

    @staticmethod
    def _coerce(t) -> Target:
        if isinstance(t, (Store, RemoteTarget)):
            return t
        if isinstance(t, str):
            return RemoteTarget(t)
        raise TypeError(f"not a store target: {t!r}")

    @staticmethod
    def _same(a: Target, b: Target) -> bool:
        if isinstance(a, RemoteTarget) or isinstance(b, RemoteTarget):
            return a == b
        return a is b

    def add_target(self, t) -> None:
        t = self._coerce(t)
        with self._lock:
            if not any(self._same(t, x) for x in self._targets):
                self._targets.append(t)

    def remove_target(self, t) -> None:
        t = self._coerce(t)
        with self._lock:
            for i, x in enumerate(self._targets):
                if self._same(t, x):
                    del self._targets[i]
                    return

    def lookup_target(self) -> list[Target]:
        with self._lock:
            return list(self._targets)

    def _split(self) -> tuple[list[Store], list[RemoteTarget]]:
        # snapshot: scans never hold the lock, so re-entrant forwarding cannot deadlock
        targets = self.lookup_target()
        return (
            [t for t in targets if isinstance(t, Store)],
            [t for t in targets if isinstance(t, RemoteTarget)],
        )

    def put(self, content: BitString) -> Key:
        return self.forward_put(as_bitstring(content), DEFAULT_HOPS, uuid.uuid4().bytes)

    def get(self, key: Key) -> BitString:
        return self.forward_get(key, DEFAULT_HOPS, uuid.uuid4().bytes)

    def forward_put(self, content: BitString, hops: int, request_id: bytes) -> Key:
        if hops <= 0:
            raise StoreNotFound("hop budget exhausted")
        local, remote = self._split()
        if local:
            first = local[0]
            log.info("proxy %s: put to local store %s", self.store_id, first.store_id)
            if isinstance(first, ProxyStore):
                return first.forward_put(content, hops - 1, request_id)
            return first.put(content)
        transport_errors = 0
        for t in remote:
            log.info("proxy %s: forwarding put to %s", self.store_id, t)
            try:
                return netd.remote_put(t.url, content, hops, request_id)
            except StoreNotFound:
                continue
            except DaemonError as exc:
                log.warning("proxy %s: %s unreachable: %s", self.store_id, t, exc)
                transport_errors += 1
        if remote and transport_errors == len(remote):
            raise DaemonError("no remote target reachable")
        raise StoreNotFound("no target accepted the put")

    def forward_get(self, key: Key, hops: int, request_id: bytes) -> BitString:
        if hops <= 0:
            raise KeyNotFound("hop budget exhausted")
        local, remote = self._split()
        for t in local:
            log.info("proxy %s: looking in store %s", self.store_id, t.store_id)
            try:
                if isinstance(t, ProxyStore):
                    return t.forward_get(key, hops - 1, request_id)
                return t.get(key)
            except KeyNotFound:
                continue
        for t in remote:
            log.info("proxy %s: forwarding get to %s", self.store_id, t)
            try:
                return netd.remote_get(t.url, key, hops, request_id)
            except (KeyNotFound, StoreNotFound):
                continue
            except DaemonError as exc:
                log.warning("proxy %s: %s unreachable: %s", self.store_id, t, exc)
        raise KeyNotFound(f"no binding for {key.hex}")

    def set_remote_shareable(self, store_id: str, flag: bool) -> None:
        """Switch shareability of a store on one of the remote target hosts."""
        for t in self._split()[1]:
            try:
                netd.remote_setshare(t.url, store_id, flag)
                return
            except (StoreNotFound, DaemonError):
                continue
        raise StoreNotFound(f"no remote host knows store {store_id}")

    def __repr__(self) -> str:
        return f"<ProxyStore {self.store_id} targets={len(self._targets)}>"


def iter_stores(store: Store) -> Iterator[Store]:
    """``store`` and every store reachable through in-process proxy targets."""
    seen: set[int] = set()
    stack = [store]
    while stack:
        s = stack.pop(0)
        if id(s) in seen:
            continue
        seen.add(id(s))
        yield s
        if isinstance(s, ProxyStore):
            stack.extend(t for t in s.lookup_target() if isinstance(t, Store))


_LOCAL_CLASSES = {"file-per-blob": FilePerBlobStore, "single-file": SingleFileStore}


def create_store(config: StoreConfig, daemon: Optional["netd.Daemon"] = None) -> Store:
    """Create a new store.  Local styles refuse backing storage that already holds a store."""
    if config.style == "proxy":
        store: Store = ProxyStore(config.targets, shareable=config.shareable)
    else:
        cls = _LOCAL_CLASSES[config.style]
        dirs = [b.path for b in config.backing]
        if cls is SingleFileStore and len(dirs) != 1:
            raise CannotCreateStore("a single-file store has exactly one backing location")
        store = cls.create(*dirs, shareable=config.shareable)
    if daemon is not None:
        daemon.register(store)
    return store


def open_store(config: StoreConfig) -> Store:
    """Open an existing local store described by ``config``."""
    if config.style == "proxy":
        return ProxyStore(config.targets, shareable=config.shareable)
    cls = _LOCAL_CLASSES[config.style]
    return cls.open(*[b.path for b in config.backing], shareable=config.shareable)


def create_local_store(*dirs, shareable: bool = False, single_file: bool = False) -> LocalStore:
    return create_store(StoreConfig.local(*dirs, shareable=shareable, single_file=single_file))


def create_proxy_store(*targets, shareable: bool = False) -> ProxyStore:
    return create_store(StoreConfig.proxy(*targets, shareable=shareable))


def set_shareable(store: Store, flag: bool, daemon: Optional["netd.Daemon"] = None) -> None:
    """Switch shareability; switching on registers the store with a daemon.

    Without an explicit ``daemon`` the process-wide local daemon is used and
    started on demand.
    """
    if flag:
        d = daemon if daemon is not None else netd.local_daemon()
        d.register(store)
    store.set_shareable(flag)
