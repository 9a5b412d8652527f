#!/usr/bin/env python3
"""The storage and XML use cases, replayed through the ``xbase`` command line.

Each function builds throwaway node homes under a scratch directory, runs
the commands a user would type (daemons included) and asserts the outcome
the scenario promises.  Run the file to replay all of them:

    python demos/usecases.py
"""
import contextlib
import os
import socket
import subprocess
import sys
import tempfile
from pathlib import Path

from xbase.bench import fixture

XML = fixture("xbasemembers.xml")
XSD = fixture("xbasemembers.xsd")


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def xbase(home, *args, data=None, expect=0):
    """Run one command against ``home``; returns stdout bytes."""
    cmd = [sys.executable, "-m", "xbase", "--home", str(home), *map(str, args)]
    proc = subprocess.run(cmd, input=data, capture_output=True, timeout=60)
    if proc.returncode != expect:
        raise AssertionError(f"{' '.join(cmd[3:])} exited {proc.returncode}: {proc.stderr.decode()}")
    return proc.stdout


def text(home, *args, **kw):
    return xbase(home, *args, **kw).decode().strip()


@contextlib.contextmanager
def serving(home, port, share_root=True):
    """``xbase serve`` in the background until the block ends."""
    cmd = [sys.executable, "-m", "xbase", "--home", str(home), "--port", str(port), "serve"]
    if share_root:
        cmd.append("--share-root")
    proc = subprocess.Popen(cmd, stdout=subprocess.PIPE, stderr=subprocess.PIPE)
    try:
        line = proc.stdout.readline().decode().strip()
        if not line.startswith("http://"):
            raise AssertionError(f"daemon on {port} did not start: {proc.stderr.read().decode()}")
        yield line
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def root_store(tmp):
    """A person put in a local root store comes back by its key."""
    home = tmp / "tsipouro"
    person = b"Person(name=Ada, town=St Andrews)"
    key = text(home, "put", data=person)
    assert xbase(home, "get", key) == person


def encrypt_and_name(tmp):
    """Encrypt, put, name; later find the key by name, get and decrypt."""
    home = tmp / "tsipouro"
    person = b"Person(name=Ada, town=St Andrews)"
    key = text(home, "put", "--encrypt", "invert", data=person)
    assert xbase(home, "get", key) == person[::-1]
    xbase(home, "bind", "Ada", key)
    # a later session: only the name is known
    found = text(home, "lookup", "Ada").splitlines()[0]
    assert xbase(home, "get", "--decrypt", "invert", found) == person


def many_kinds_of_entity(tmp):
    """Documents, audio, images and XML are all just bitstrings."""
    home = tmp / "tsipouro"
    entities = {
        "report.doc": b"\xd0\xcf\x11\xe0" + bytes(range(256)) * 8,
        "clip.wav": b"RIFF" + os.urandom(4096),
        "photo.png": b"\x89PNG\r\n\x1a\n" + os.urandom(2048),
        "members.xml": XML,
    }
    keys = {}
    for name, data in entities.items():
        path = tmp / name
        path.write_bytes(data)
        keys[name] = text(home, "put", "--file", path)
    for name, key in keys.items():
        assert xbase(home, "get", key) == entities[name]


def store_inside_a_store(tmp):
    """A store is reified, kept in the root store and reflected again."""
    inner, root, later = tmp / "inner", tmp / "tsipouro", tmp / "later"
    doc_key = text(inner, "put", data=XML)
    xbase(inner, "stabilise")
    store_rep = (inner / "root-store.xml").read_bytes()
    rep_key = text(root, "put", data=store_rep)
    xbase(root, "bind", "myStore", rep_key)
    # retrieve the representation by name and reflect it as the store of a new session
    found = text(root, "lookup", "myStore")
    later.mkdir()
    (later / "root-store.xml").write_bytes(xbase(root, "get", found))
    assert xbase(later, "get", doc_key) == XML


def proxy_root_store(tmp):
    """A shareable local store reached through a proxy root store."""
    home = tmp / "tsipouro"
    sid = text(home, "--root-kind", "proxy", "target", "add", "--local", tmp / "local", "--shareable")
    key = text(home, "put", data=XML)
    assert (tmp / "local" / key).read_bytes() == XML
    assert xbase(home, "get", key) == XML
    listing = text(home, "target", "list")
    assert sid in listing and "file-per-blob" in listing


def remote_store(tmp):
    """Images put on and fetched from a store on another host."""
    ouzo, tsipouro = tmp / "ouzo", tmp / "tsipouro"
    first, second = os.urandom(5000), os.urandom(7000)
    k1 = text(ouzo, "put", data=first)
    port = free_port()
    with serving(ouzo, port) as url:
        text(tsipouro, "--root-kind", "proxy", "target", "add", url)
        k2 = text(tsipouro, "put", data=second)
        assert xbase(tsipouro, "get", k1) == first
        assert xbase(tsipouro, "get", k2) == second
    assert (ouzo / "root-store-data" / k2).read_bytes() == second


def three_host_chain(tmp):
    """tsipouro forwards to ouzo, which forwards to panda."""
    panda, ouzo, tsipouro = tmp / "panda", tmp / "ouzo", tmp / "tsipouro"
    xbase(panda, "stabilise")
    with serving(panda, free_port()) as panda_url:
        text(ouzo, "--root-kind", "proxy", "target", "add", panda_url)
        with serving(ouzo, free_port()) as ouzo_url:
            text(tsipouro, "--root-kind", "proxy", "target", "add", ouzo_url)
            key = text(tsipouro, "put", data=XML)
            assert (panda / "root-store-data" / key).read_bytes() == XML
            assert xbase(tsipouro, "get", key) == XML


def xml_fragments_by_key(tmp):
    """Shred, put every fragment, fetch them by key and reassemble."""
    home = tmp / "tsipouro"
    (tmp / "m.xml").write_bytes(XML)
    (tmp / "m.xsd").write_bytes(XSD)
    text(home, "--root-kind", "proxy", "target", "add", "--local", tmp / "local")
    assert text(home, "shred", tmp / "m.xml", "--schema", tmp / "m.xsd", "--out", tmp / "frags") == "10"
    keys = [text(home, "put", "--file", f) for f in sorted((tmp / "frags").iterdir())]
    back = tmp / "back"
    back.mkdir()
    for i, key in enumerate(keys):
        (back / f"{i}.xml").write_bytes(xbase(home, "get", key))
    rebuilt = xbase(home, "assemble", back)
    assert rebuilt == xbase(home, "assemble", tmp / "frags")
    assert b"<age>29</age>" in rebuilt


def xml_by_name(tmp):
    """Store with granularity rules, retrieve by the recorded name."""
    home = tmp / "tsipouro"
    (tmp / "m.xml").write_bytes(XML)
    (tmp / "m.xsd").write_bytes(XSD)
    text(home, "--root-kind", "proxy", "target", "add", "--local", tmp / "local")
    name = text(home, "xstore", tmp / "m.xml", "--schema", tmp / "m.xsd")
    blobs = [p.read_bytes() for p in (tmp / "local").glob("[0-9a-f]" * 64)]
    assert sum(b"<XBaseName" in b for b in blobs) == 10  # the other blob is the root namer
    got = xbase(home, "xget", name)
    assert b"<town>Kingsbarns</town>" in got
    return home, name


def xml_versions(tmp):
    """Modify a stored document, put it back, read the new version by name."""
    home, name = xml_by_name(tmp)
    doc = xbase(home, "xget", name).decode()
    doc = doc.replace("<age>29</age>", "<age>30</age>").replace("<age>36</age>", "<age>37</age>")
    (tmp / "edited.xml").write_text(doc)
    report = text(home, "xupdate", name, tmp / "edited.xml")
    assert report.splitlines()[:2] == ["new blobs: 2", "rebound: 2"]
    assert b"<age>30</age>" in xbase(home, "xget", name)
    # the person fragment now has two versions
    person = [line.strip() for line in report.splitlines()[2:]][0]
    assert len(text(home, "lookup", person, "--versions").splitlines()) == 2


USE_CASES = [
    root_store, encrypt_and_name, many_kinds_of_entity, store_inside_a_store,
    proxy_root_store, remote_store, three_host_chain,
    xml_fragments_by_key, xml_by_name, xml_versions,
]


if __name__ == "__main__":
    for case in USE_CASES:
        with tempfile.TemporaryDirectory() as tmp:
            case(Path(tmp))
        print(f"ok  {case.__name__}: {case.__doc__}")
