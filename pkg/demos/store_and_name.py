#!/usr/bin/env python3
"""Stores, keys and names, used directly from Python.

Walks through putting bytes in two kinds of local store, reaching them
through a proxy, naming a key and keeping the whole arrangement across a
restart by stabilising the root.
"""
import tempfile
from pathlib import Path

from xbase import (
    FilePerBlobStore,
    Namer,
    RuntimeConfig,
    SingleFileStore,
    derive_key,
    get_root_namer,
    get_root_store,
    stabilise_root,
)
from xbase.codecs import store_reify
from xbase.errors import KeyExists
from xbase.root import reset_roots

tmp = Path(tempfile.mkdtemp())

# Keys come from the content alone, so two unrelated stores agree on them.
blobs = FilePerBlobStore.create(tmp / "blobs-a", tmp / "blobs-b")
log = SingleFileStore.create(tmp / "log")
k = blobs.put(b"Ada")
assert k == log.put(b"Ada") == derive_key(b"Ada")
print("key", k.hex)

# Stores are append-only: the same bytes cannot be bound twice.
try:
    blobs.put(b"Ada")
except KeyExists as exc:
    print("already stored under", exc.key.hex[:16], "...")

# A namer is the only thing that changes; it maps names to keys over time.
namer = Namer()
namer.bind("person", k)
namer.bind("person", blobs.put(b"Ada, St Andrews"))
for version, key in namer.versions("person"):
    print("person @", version.timestamp, version.seq, "->", key.hex[:16])

# A proxy root store forwards to its targets; stabilising writes it out.
env = RuntimeConfig(home=tmp / "home", root_store_kind="proxy")
root = get_root_store(env)
root.add_target(blobs)
get_root_namer(env).bind("person", k)
stabilise_root(env)
print(store_reify(root).decode())

# After a restart the root store and namer are rebuilt from the home directory.
reset_roots()
again = get_root_store(env)
print("restored", again.store_id == root.store_id,
      again.get(get_root_namer(env).lookup_latest("person")))
