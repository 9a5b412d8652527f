"""Root store and root namer: the process's fixed persistence roots.

Both live under a home directory (``XBASE_HOME``, default ``./xbase-home``):

* ``root-store.xml`` -- the stabilised store representation;
* ``root-store.id``  -- the root store's id (proxy roots have no backing
  directory to keep it in);
* ``root-namer.key`` -- key of the stabilised root namer in the root store.
"""
from __future__ import annotations

import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from xbase import codecs
from xbase.core import Store, is_store_id, parse_key
from xbase.errors import (
    KeyExists,
    ReflectError,
    RootStabilisationError,
    StoreNotFound,
    XBaseError,
)
from xbase.namer import Namer
from xbase.stores import FilePerBlobStore, ID_FILE, ProxyStore, _write_atomic

ROOT_STORE_FILE = "root-store.xml"
ROOT_ID_FILE = "root-store.id"
ROOT_NAMER_FILE = "root-namer.key"
ROOT_DATA_DIR = "root-store-data"
ROOT_KINDS = ("local", "proxy")


@dataclass
class RuntimeConfig:
    home: Path = field(default_factory=lambda: Path("xbase-home"))
    root_store_kind: str = "local"
    node_ip: str = "127.0.0.1"
    port: int = 17000

    def __post_init__(self) -> None:
        self.home = Path(self.home)
        if self.root_store_kind not in ROOT_KINDS:
            raise ValueError(f"root_store_kind is one of {ROOT_KINDS}")

    @classmethod
    def from_env(cls, **overrides) -> "RuntimeConfig":
        """Flags (``overrides``) win over environment variables, which win over defaults."""
        env = os.environ
        values = {
            "home": Path(env.get("XBASE_HOME", "xbase-home")),
            "root_store_kind": env.get("XBASE_ROOT_KIND", "local"),
            "node_ip": env.get("XBASE_NODE_IP", "127.0.0.1"),
            "port": int(env.get("XBASE_PORT", 17000)),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


_lock = threading.RLock()
_roots: dict[Path, Store] = {}
_namers: dict[Path, Namer] = {}


def _slot(env: RuntimeConfig) -> Path:
    return env.home.resolve()


def reset_roots() -> None:
    """Forget cached roots, as a process restart would."""
    with _lock:
        for store in _roots.values():
            store.close()
        _roots.clear()
        _namers.clear()


def _fresh_root(env: RuntimeConfig) -> Store:
    if env.root_store_kind == "proxy":
        return ProxyStore()
    data = env.home / ROOT_DATA_DIR
    if (data / ID_FILE).exists():
        return FilePerBlobStore.open(data)
    return FilePerBlobStore.create(data)


def get_root_store(env: Optional[RuntimeConfig] = None) -> Store:
    """The process-wide root store for ``env.home``.

    A stabilised representation, if present, is reflected; otherwise a fresh
    root of kind ``env.root_store_kind`` is made.
    """
    env = env or RuntimeConfig.from_env()
    with _lock:
        slot = _slot(env)
        if slot in _roots:
            return _roots[slot]
        rep_path = env.home / ROOT_STORE_FILE
        if rep_path.exists():
            try:
                store = codecs.store_reflect(rep_path.read_bytes())
            except (OSError, ReflectError, StoreNotFound) as exc:
                raise StoreNotFound(f"stabilised root store unusable: {exc}") from exc
            id_path = env.home / ROOT_ID_FILE
            if isinstance(store, ProxyStore) and id_path.exists():
                sid = id_path.read_text().strip()
                if is_store_id(sid):
                    store.store_id = sid
        else:
            store = _fresh_root(env)
        _roots[slot] = store
        return store


def get_root_namer(env: Optional[RuntimeConfig] = None) -> Namer:
    """The root namer; reflected from the root store if one was stabilised."""
    env = env or RuntimeConfig.from_env()
    with _lock:
        slot = _slot(env)
        if slot in _namers:
            return _namers[slot]
        key_path = env.home / ROOT_NAMER_FILE
        if key_path.exists():
            key = parse_key(key_path.read_text().strip())
            namer = codecs.namer_reflect(get_root_store(env).get(key))
        else:
            namer = Namer()
        _namers[slot] = namer
        return namer


def stabilise_root(env: Optional[RuntimeConfig] = None) -> None:
    """Write the root store's representation (and the root namer) to ``env.home``."""
    env = env or RuntimeConfig.from_env()
    with _lock:
        try:
            store = get_root_store(env)
            env.home.mkdir(parents=True, exist_ok=True)
            namer = _namers.get(_slot(env))
            if namer is not None:
                rep = codecs.namer_reify(namer)
                try:
                    key = store.put(rep)
                except KeyExists as exc:
                    key = exc.key
                _write_atomic(env.home / ROOT_NAMER_FILE, (key.hex + "\n").encode())
            _write_atomic(env.home / ROOT_STORE_FILE, codecs.store_reify(store))
            _write_atomic(env.home / ROOT_ID_FILE, (store.store_id + "\n").encode())
        except (OSError, XBaseError) as exc:
            raise RootStabilisationError(f"cannot stabilise root in {env.home}: {exc}") from exc
