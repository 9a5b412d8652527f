import socket
import struct
import time

import pytest

from xbase.core import derive_key
from xbase.errors import DaemonError, IllegalKey, KeyExists, KeyNotFound, StoreNotFound
from xbase.netd import (
    OP_GET,
    OP_PUT,
    Daemon,
    _SeenRequests,
    encode_request,
    encode_response,
    remote_get,
    remote_get_id,
    remote_list,
    remote_put,
    remote_setshare,
)
from xbase.stores import FilePerBlobStore, ProxyStore, set_shareable

RID = bytes(range(16))


@pytest.fixture
def serve():
    started = []

    def start(*stores, port=0):
        d = Daemon("127.0.0.1", port, stores).start()
        started.append(d)
        return d

    yield start
    for d in started:
        d.close()


def test_request_frame_is_bit_exact():
    sid = "ab" * 16
    frame = encode_request(OP_PUT, RID, 8, sid, b"xyz")
    assert frame == b"\x01" + RID + b"\x08" + b"\x20" + sid.encode() + b"\x00\x00\x00\x03xyz"
    assert encode_request(OP_GET, RID, 1, "", b"") == b"\x02" + RID + b"\x01\x00\x00\x00\x00\x00"


def test_response_frame_is_bit_exact():
    assert encode_response(0, b"ok") == b"\x00\x00\x00\x00\x02ok"
    assert encode_response(6) == b"\x06\x00\x00\x00\x00"


def test_seen_requests_are_bounded():
    seen = _SeenRequests(capacity=3)
    assert not seen.check_and_add(b"a")
    assert seen.check_and_add(b"a")
    for x in (b"b", b"c", b"d"):
        seen.check_and_add(x)
    assert not seen.check_and_add(b"a")  # evicted


def test_put_get_list_and_id(serve, tmp_path):
    s = FilePerBlobStore.create(tmp_path / "s", shareable=True)
    hidden = FilePerBlobStore.create(tmp_path / "h")
    d = serve(s, hidden)
    k = remote_put(d.url, b"over the wire")
    assert k == derive_key(b"over the wire")
    assert remote_get(d.url, k) == b"over the wire"
    assert s.get(k) == b"over the wire"
    assert remote_list(d.url) == [s.store_id]
    assert remote_get_id(d.url) == s.store_id
    with pytest.raises(KeyExists) as exc:
        remote_put(d.url, b"over the wire")
    assert exc.value.key == k
    with pytest.raises(KeyNotFound):
        remote_get(d.url, derive_key(b"nope"))


def test_private_stores_are_refused(serve, tmp_path):
    s = FilePerBlobStore.create(tmp_path / "s")
    k = s.put(b"mine")
    d = serve(s)
    with pytest.raises(StoreNotFound):
        remote_get(d.url, k, store_id=s.store_id)
    with pytest.raises(StoreNotFound):
        remote_get(d.url, k)
    assert remote_list(d.url) == []


def test_setshare_switches_access(serve, tmp_path):
    s = FilePerBlobStore.create(tmp_path / "s")
    k = s.put(b"soon shared")
    d = serve(s)
    remote_setshare(d.url, s.store_id, True)
    assert s.shareable
    assert remote_get(d.url, k, store_id=s.store_id) == b"soon shared"
    remote_setshare(d.url, s.store_id, False)
    with pytest.raises(StoreNotFound):
        remote_get(d.url, k, store_id=s.store_id)
    with pytest.raises(StoreNotFound):
        remote_setshare(d.url, "0" * 32, True)


def test_set_shareable_registers_with_a_daemon(serve, tmp_path):
    d = serve()
    s = FilePerBlobStore.create(tmp_path / "s")
    set_shareable(s, True, daemon=d)
    assert remote_list(d.url) == [s.store_id]


def test_serving_twice_on_one_port_fails(serve):
    d = serve()
    with pytest.raises(DaemonError):
        Daemon("127.0.0.1", d.port).start()


def test_unreachable_daemon():
    with pytest.raises(DaemonError):
        remote_get("http://127.0.0.1:1", derive_key(b"x"))


def test_malformed_key_on_the_wire(serve, tmp_path):
    d = serve(FilePerBlobStore.create(tmp_path / "s", shareable=True))
    with socket.create_connection(("127.0.0.1", d.port), timeout=5) as sock:
        sock.sendall(encode_request(OP_GET, RID, 8, "", b"short"))
        status, n = struct.unpack(">BI", sock.recv(5))
    assert status == 4  # IllegalKey


def test_put_through_a_proxy_lands_on_the_remote_store(serve, tmp_path):
    ouzo = FilePerBlobStore.create(tmp_path / "ouzo", shareable=True)
    d = serve(ouzo)
    image = bytes(range(256)) * 40
    proxy = ProxyStore([d.url])
    k = proxy.put(image)
    assert ouzo.get(k) == image
    assert proxy.get(k) == image


def test_three_host_chain(serve, tmp_path):
    panda = FilePerBlobStore.create(tmp_path / "panda", shareable=True)
    serve(panda, port=17003)
    ouzo = ProxyStore(["http://127.0.0.1:17003"], shareable=True)
    serve(ouzo, port=17002)
    tsipouro = ProxyStore(["http://127.0.0.1:17002"], shareable=True)
    serve(tsipouro, port=17001)
    doc = b"<doc>travels two hops</doc>"
    k = ProxyStore(["http://127.0.0.1:17001"]).put(doc)
    assert panda.get(k) == doc
    assert ProxyStore(["http://127.0.0.1:17001"]).get(k) == doc
    assert tsipouro.get(k) == doc


def test_cyclic_proxies_terminate(serve):
    a, b = ProxyStore(shareable=True), ProxyStore(shareable=True)
    da, db = serve(a), serve(b)
    a.add_target(db.url)
    b.add_target(da.url)
    t0 = time.monotonic()
    with pytest.raises(KeyNotFound):
        ProxyStore([da.url]).get(derive_key(b"nowhere"))
    with pytest.raises((StoreNotFound, DaemonError)):
        ProxyStore([da.url]).put(b"no home")
    assert time.monotonic() - t0 < 10


def test_hop_budget_alone_stops_forwarding(serve, tmp_path):
    far = FilePerBlobStore.create(tmp_path / "far", shareable=True)
    k = far.put(b"far away")
    d3 = serve(far)
    d2 = serve(ProxyStore([d3.url], shareable=True))
    d1 = serve(ProxyStore([d2.url], shareable=True))
    assert remote_get(d1.url, k, hop_budget=3) == b"far away"
    with pytest.raises(KeyNotFound):
        remote_get(d1.url, k, hop_budget=2)


def test_bad_url():
    with pytest.raises(DaemonError):
        remote_get("nonsense", derive_key(b"x"))


def test_illegal_key_error_class():
    assert IllegalKey.kind.value == 4
