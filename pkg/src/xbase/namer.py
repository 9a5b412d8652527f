"""Many-many Name/Key bindings with version history.

A plain :meth:`Namer.bind` is a versioned bind stamped with the current
clock, so a single structure answers both the set-valued ``lookup`` and the
version-aware ``lookup_versioned`` / ``lookup_latest``.
"""
from __future__ import annotations

import threading
from typing import Iterator, Optional

from xbase.core import Key, VersionTuple, check_name, new_version, observe_version
from xbase.errors import NameNotFound


class Namer:
    def __init__(self) -> None:
        # name -> distinct keys in first-bind order
        self._keys: dict[str, list[Key]] = {}
        # name -> {(timestamp, seq): key}
        self._versions: dict[str, dict[tuple[int, int], Key]] = {}
        self._lock = threading.RLock()

    def bind(self, name: str, key: Key) -> Optional[VersionTuple]:
        """Bind ``name`` to ``key``.

        A new version is recorded unless ``key`` already is the latest one;
        returns that version or None.
        """
        with self._lock:
            if name in self._versions and self._latest(name) == key:
                return None
            vt = new_version(name)
            self.bind_versioned(vt, key)
            return vt

    def bind_versioned(self, vt: VersionTuple, key: Key) -> None:
        check_name(vt.name)
        if not isinstance(key, Key):
            raise TypeError(f"expected a Key, got {type(key).__name__}")
        observe_version(vt)
        with self._lock:
            keys = self._keys.setdefault(vt.name, [])
            if key not in keys:
                keys.append(key)
            self._versions.setdefault(vt.name, {})[vt.order] = key

    def unbind(self, name: str, key: Key) -> None:
        with self._lock:
            if name not in self._keys:
                raise NameNotFound(name)
            keys = self._keys[name]
            if key in keys:
                keys.remove(key)
                versions = self._versions[name]
                for order in [o for o, k in versions.items() if k == key]:
                    del versions[order]
            if not keys:
                del self._keys[name]
                del self._versions[name]

    def unbind_versioned(self, vt: VersionTuple, key: Key) -> None:
        with self._lock:
            versions = self._versions.get(vt.name)
            if not versions or versions.get(vt.order) != key:
                raise NameNotFound(f"{vt.name} @ {vt.timestamp}/{vt.seq}")
            del versions[vt.order]
            if key not in versions.values():
                self._keys[vt.name].remove(key)
            if not versions:
                del self._keys[vt.name]
                del self._versions[vt.name]

    def lookup(self, name: str) -> list[Key]:
        with self._lock:
            try:
                return list(self._keys[name])
            except KeyError:
                raise NameNotFound(name) from None

    def lookup_versioned(self, vt: VersionTuple) -> Key:
        with self._lock:
            try:
                return self._versions[vt.name][vt.order]
            except KeyError:
                raise NameNotFound(f"{vt.name} @ {vt.timestamp}/{vt.seq}") from None

    def _latest(self, name: str) -> Key:
        versions = self._versions[name]
        return versions[max(versions)]

    def lookup_latest(self, name: str) -> Key:
        with self._lock:
            if name not in self._versions:
                raise NameNotFound(name)
            return self._latest(name)

    def versions(self, name: str) -> list[tuple[VersionTuple, Key]]:
        """All versions of ``name``, oldest first."""
        with self._lock:
            if name not in self._versions:
                raise NameNotFound(name)
            return [(VersionTuple(name, *o), k) for o, k in sorted(self._versions[name].items())]

    def has_name(self, name: str) -> bool:
        with self._lock:
            return name in self._keys

    def names(self) -> list[str]:
        with self._lock:
            return list(self._keys)

    def history(self) -> Iterator[tuple[VersionTuple, Key]]:
        """Every recorded version, grouped by name and key in lookup order.

        Replaying this sequence through :meth:`bind_versioned` rebuilds an
        identical namer.
        """
        with self._lock:
            snapshot = []
            for name, keys in self._keys.items():
                versions = sorted(self._versions[name].items())
                for key in keys:
                    snapshot.extend((VersionTuple(name, *o), k) for o, k in versions if k == key)
        return iter(snapshot)

    def __len__(self) -> int:
        with self._lock:
            return sum(len(v) for v in self._versions.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Namer):
            return NotImplemented
        return list(self.history()) == list(other.history())

    def __repr__(self) -> str:
        return f"<Namer names={len(self._keys)} versions={len(self)}>"
