"""Shareability daemon and remote-store client.

Frames are length-prefixed binary over TCP::

    request  = op:1 request_id:16 hop_budget:1 store_id_len:1 store_id payload_len:4 payload
    response = status:1 payload_len:4 payload

``status`` is 0 for success, otherwise the :class:`~xbase.errors.ErrorKind`
value.  Target URLs are written ``http://host:port[/store-id]`` although the
transport is this raw protocol, not HTTP.
"""
from __future__ import annotations

import logging
import os
import socket
import socketserver
import struct
import threading
import uuid
from collections import OrderedDict
from typing import Optional
from urllib.parse import urlsplit

from xbase.core import Key, derive_key
from xbase.errors import (
    DaemonError,
    ErrorKind,
    KeyNotFound,
    StoreNotFound,
    XBaseError,
    error_for,
)

log = logging.getLogger(__name__)

DEFAULT_PORT = 17000
DEFAULT_HOPS = 8
SEEN_CAPACITY = 4096
CLIENT_TIMEOUT = 10.0

OP_PUT = 0x01
OP_GET = 0x02
OP_GETID = 0x03
OP_LIST = 0x04
OP_SETSHARE = 0x05
OPS = {OP_PUT, OP_GET, OP_GETID, OP_LIST, OP_SETSHARE}

STATUS_OK = 0

_REQ_HEAD = struct.Struct(">B16sBB")
_LEN = struct.Struct(">I")
_RESP_HEAD = struct.Struct(">BI")


def encode_request(op: int, request_id: bytes, hop_budget: int, store_id: str, payload: bytes) -> bytes:
    sid = store_id.encode("ascii")
    if len(request_id) != 16:
        raise ValueError("request ids are 16 bytes")
    return _REQ_HEAD.pack(op, request_id, hop_budget, len(sid)) + sid + _LEN.pack(len(payload)) + payload


def encode_response(status: int, payload: bytes = b"") -> bytes:
    return _RESP_HEAD.pack(status, len(payload)) + payload


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise EOFError("connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_request(sock: socket.socket) -> tuple[int, bytes, int, str, bytes]:
    op, rid, hops, sid_len = _REQ_HEAD.unpack(_recv_exact(sock, _REQ_HEAD.size))
    sid = _recv_exact(sock, sid_len).decode("ascii")
    (plen,) = _LEN.unpack(_recv_exact(sock, _LEN.size))
    return op, rid, hops, sid, _recv_exact(sock, plen)


def read_response(sock: socket.socket) -> tuple[int, bytes]:
    status, plen = _RESP_HEAD.unpack(_recv_exact(sock, _RESP_HEAD.size))
    return status, _recv_exact(sock, plen)


class _SeenRequests:
    def __init__(self, capacity: int = SEEN_CAPACITY) -> None:
        self._ids: OrderedDict[bytes, None] = OrderedDict()
        self._capacity = capacity
        self._lock = threading.Lock()

    def check_and_add(self, rid: bytes) -> bool:
        """True if ``rid`` was already seen."""
        with self._lock:
            if rid in self._ids:
                self._ids.move_to_end(rid)
                return True
            self._ids[rid] = None
            if len(self._ids) > self._capacity:
                self._ids.popitem(last=False)
            return False


class _Handler(socketserver.BaseRequestHandler):
    def handle(self) -> None:
        daemon: Daemon = self.server.xbase_daemon
        sock = self.request
        try:
            op, rid, hops, sid, payload = read_request(sock)
        except (EOFError, OSError, struct.error, UnicodeDecodeError) as exc:
            log.debug("bad frame from %s: %s", self.client_address, exc)
            return
        try:
            status, out = STATUS_OK, daemon.dispatch(op, rid, hops, sid, payload)
        except XBaseError as exc:
            status = int(exc.kind)
            out = exc.key.hex.encode() if exc.kind is ErrorKind.KeyExists else str(exc).encode()
        except Exception as exc:  # never let a handler thread die silently
            log.exception("daemon failure")
            status, out = int(ErrorKind.DaemonError), repr(exc).encode()
        try:
            sock.sendall(encode_response(status, out))
        except OSError:
            pass


class _Server(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class Daemon:
    """Serves every registered shareable store on one host/port.

    Stores stay registered when their shareability is switched off so that
    SETSHARE can switch them back on; requests for a private store are
    refused as if it did not exist.
    """

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT, stores=()):
        self.host = host
        self.port = port
        self._stores: list = []
        self._lock = threading.RLock()
        self._seen = _SeenRequests()
        self._server: Optional[_Server] = None
        self._thread: Optional[threading.Thread] = None
        for s in stores:
            self.register(s)

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def register(self, store) -> None:
        with self._lock:
            if not any(s is store for s in self._stores):
                self._stores.append(store)

    def unregister(self, store) -> None:
        with self._lock:
            self._stores = [s for s in self._stores if s is not store]

    def shareable_stores(self) -> list:
        with self._lock:
            return [s for s in self._stores if s.shareable]

    def bind(self) -> _Server:
        try:
            server = _Server((self.host, self.port), _Handler)
        except OSError as exc:
            raise DaemonError(f"cannot listen on {self.host}:{self.port}: {exc}") from exc
        server.xbase_daemon = self
        self.port = server.server_address[1]
        self._server = server
        return server

    def start(self) -> "Daemon":
        """Listen and serve from a background thread."""
        server = self.bind()
        self._thread = threading.Thread(target=server.serve_forever, args=(0.05,), name=f"xbase-daemon-{self.port}", daemon=True)
        self._thread.start()
        log.info("daemon listening on %s", self.url)
        return self

    def serve_forever(self) -> None:
        server = self._server or self.bind()
        log.info("daemon listening on %s", self.url)
        try:
            server.serve_forever()
        finally:
            server.server_close()

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self):
        return self.start() if self._server is None else self

    def __exit__(self, *exc) -> None:
        self.close()

    def _select(self, store_id: str) -> list:
        with self._lock:
            if store_id:
                for s in self._stores:
                    if s.store_id == store_id and s.shareable:
                        return [s]
                raise StoreNotFound(f"no shareable store {store_id} on this host")
            stores = [s for s in self._stores if s.shareable]
        if not stores:
            raise StoreNotFound("no shareable stores on this host")
        return stores

    def dispatch(self, op: int, rid: bytes, hops: int, store_id: str, payload: bytes) -> bytes:
        if op == OP_GET:
            return self._get(Key(payload) if len(payload) == 32 else _bad_key(payload), rid, hops, store_id)
        if op == OP_PUT:
            return self._put(payload, rid, hops, store_id).digest
        if op == OP_GETID:
            return self._select(store_id)[0].store_id.encode()
        if op == OP_LIST:
            return "\n".join(s.store_id for s in self._select("")).encode() if self.shareable_stores() else b""
        if op == OP_SETSHARE:
            return self._setshare(store_id, payload)
        raise DaemonError(f"unknown op {op}")

    def _get(self, key: Key, rid: bytes, hops: int, store_id: str) -> bytes:
        if hops == 0 or self._seen.check_and_add(rid):
            raise KeyNotFound("request already seen or hop budget exhausted")
        for s in self._select(store_id):
            try:
                if hasattr(s, "forward_get"):
                    log.info("daemon %s: forwarding get through proxy %s", self.port, s.store_id)
                    return s.forward_get(key, hops - 1, rid)
                return s.get(key)
            except KeyNotFound:
                continue
        raise KeyNotFound(f"no binding for {key.hex}")

    def _put(self, content: bytes, rid: bytes, hops: int, store_id: str) -> Key:
        if hops == 0 or self._seen.check_and_add(rid):
            raise StoreNotFound("request already seen or hop budget exhausted")
        for s in self._select(store_id):
            if hasattr(s, "forward_put"):
                try:
                    log.info("daemon %s: forwarding put through proxy %s", self.port, s.store_id)
                    return s.forward_put(content, hops - 1, rid)
                except (StoreNotFound, DaemonError):
                    continue
            return s.put(content)
        raise StoreNotFound("no store accepted the put")

    def _setshare(self, store_id: str, payload: bytes) -> bytes:
        if len(payload) != 1 or payload[0] not in (0, 1):
            raise DaemonError("SETSHARE payload is one byte, 0 or 1")
        with self._lock:
            for s in self._stores:
                if s.store_id == store_id:
                    s.set_shareable(bool(payload[0]))
                    return b""
        raise StoreNotFound(f"no store {store_id} on this host")


def _bad_key(payload: bytes):
    from xbase.errors import IllegalKey

    raise IllegalKey(f"keys are 32 bytes on the wire, got {len(payload)}")


def _parse_url(url: str) -> tuple[str, int, str]:
    parts = urlsplit(url)
    if not parts.hostname:
        raise DaemonError(f"bad daemon URL {url!r}")
    return parts.hostname, parts.port or DEFAULT_PORT, parts.path.strip("/")


def _call(url: str, op: int, payload: bytes = b"", hop_budget: int = DEFAULT_HOPS,
          request_id: Optional[bytes] = None, store_id: Optional[str] = None,
          timeout: float = CLIENT_TIMEOUT) -> bytes:
    host, port, path_sid = _parse_url(url)
    sid = path_sid if store_id is None else store_id
    frame = encode_request(op, request_id or uuid.uuid4().bytes, hop_budget, sid, payload)
    try:
        with socket.create_connection((host, port), timeout=timeout) as sock:
            sock.sendall(frame)
            status, out = read_response(sock)
    except (OSError, EOFError, struct.error) as exc:
        raise DaemonError(f"{url}: {exc}") from exc
    if status == STATUS_OK:
        return out
    try:
        kind = ErrorKind(status)
    except ValueError:
        raise DaemonError(f"{url}: unknown status {status}") from None
    raise error_for(kind, out.decode("utf-8", "replace"))


def remote_put(url: str, content: bytes, hop_budget: int = DEFAULT_HOPS,
               request_id: Optional[bytes] = None, store_id: Optional[str] = None) -> Key:
    out = _call(url, OP_PUT, content, hop_budget, request_id, store_id)
    key = Key(out)
    if key != derive_key(content):
        raise DaemonError(f"{url} returned a key that does not match the content")
    return key


def remote_get(url: str, key: Key, hop_budget: int = DEFAULT_HOPS,
               request_id: Optional[bytes] = None, store_id: Optional[str] = None) -> bytes:
    return _call(url, OP_GET, key.digest, hop_budget, request_id, store_id)


def remote_get_id(url: str, store_id: Optional[str] = None) -> str:
    return _call(url, OP_GETID, store_id=store_id).decode()


def remote_list(url: str) -> list[str]:
    out = _call(url, OP_LIST, store_id="").decode()
    return [line for line in out.split("\n") if line]


def remote_setshare(url: str, store_id: str, flag: bool) -> None:
    _call(url, OP_SETSHARE, bytes([1 if flag else 0]), store_id=store_id)


_local: Optional[Daemon] = None
_local_lock = threading.Lock()


def local_daemon(port: Optional[int] = None) -> Daemon:
    """The process-wide daemon, started on first use (port from ``XBASE_PORT``)."""
    global _local
    with _local_lock:
        if _local is None:
            if port is None:
                port = int(os.environ.get("XBASE_PORT", DEFAULT_PORT))
            _local = Daemon(port=port).start()
        return _local


def stop_local_daemon() -> None:
    global _local
    with _local_lock:
        if _local is not None:
            _local.close()
            _local = None
