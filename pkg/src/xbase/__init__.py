"""Composable content-addressed storage: stores, namers, casters and interpreters."""
from xbase.core import (
    BitString,
    Caster,
    Interpreter,
    Key,
    Store,
    VersionTuple,
    derive_key,
    parse_key,
    render_key,
)
from xbase.errors import ErrorKind, XBaseError
from xbase.namer import Namer
from xbase.root import RuntimeConfig, get_root_namer, get_root_store, stabilise_root
from xbase.stores import (
    BackingStorageDetails,
    FilePerBlobStore,
    ProxyStore,
    RemoteTarget,
    SingleFileStore,
    StoreConfig,
    create_local_store,
    create_proxy_store,
    create_store,
    open_store,
    set_shareable,
)

__version__ = "0.1.0"

__all__ = [
    "BackingStorageDetails", "BitString", "Caster", "ErrorKind", "FilePerBlobStore",
    "Interpreter", "Key", "Namer", "ProxyStore", "RemoteTarget", "RuntimeConfig",
    "SingleFileStore", "Store", "StoreConfig", "VersionTuple", "XBaseError",
    "create_local_store", "create_proxy_store", "create_store", "derive_key",
    "get_root_namer", "get_root_store", "open_store", "parse_key", "render_key",
    "set_shareable", "stabilise_root",
]
