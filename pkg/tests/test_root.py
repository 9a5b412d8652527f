import pytest

from xbase.core import derive_key
from xbase.errors import IllegalKey, RootStabilisationError, StoreNotFound
from xbase.root import (
    ROOT_NAMER_FILE,
    ROOT_STORE_FILE,
    RuntimeConfig,
    get_root_namer,
    get_root_store,
    reset_roots,
    stabilise_root,
)
from xbase.stores import FilePerBlobStore, ProxyStore, RemoteTarget


def test_config_precedence(monkeypatch, tmp_path):
    monkeypatch.setenv("XBASE_HOME", str(tmp_path / "env-home"))
    monkeypatch.setenv("XBASE_PORT", "17100")
    monkeypatch.setenv("XBASE_NODE_IP", "10.0.0.1")
    env = RuntimeConfig.from_env(port=17200)
    assert env.home == tmp_path / "env-home"
    assert env.port == 17200 and env.node_ip == "10.0.0.1"
    monkeypatch.delenv("XBASE_HOME")
    monkeypatch.delenv("XBASE_PORT")
    assert RuntimeConfig.from_env().port == 17000
    assert str(RuntimeConfig.from_env().home) == "xbase-home"
    with pytest.raises(ValueError):
        RuntimeConfig(root_store_kind="tape")


def test_root_store_is_a_process_singleton(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h")
    assert get_root_store(env) is get_root_store(env)
    assert get_root_namer(env) is get_root_namer(env)


def test_local_root_survives_restart(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h")
    root = get_root_store(env)
    k = root.put(b"kept")
    get_root_namer(env).bind("kept", k)
    stabilise_root(env)
    sid = root.store_id
    reset_roots()
    again = get_root_store(env)
    assert again is not root and again.store_id == sid
    assert again.get(k) == b"kept"
    assert get_root_namer(env).lookup("kept") == [k]


def test_proxy_root_survives_restart(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h", root_store_kind="proxy")
    root = get_root_store(env)
    assert isinstance(root, ProxyStore)
    local = FilePerBlobStore.create(tmp_path / "local")
    root.add_target(local)
    root.add_target("http://127.0.0.1:17005")
    k = root.put(b"via proxy")
    stabilise_root(env)
    sid = root.store_id
    reset_roots()
    again = get_root_store(env)
    assert again.store_id == sid
    targets = again.lookup_target()
    assert targets[0].store_id == local.store_id and targets[1] == RemoteTarget("http://127.0.0.1:17005")
    assert again.get(k) == b"via proxy"


def test_namer_key_file(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h")
    get_root_namer(env).bind("n", derive_key(b"x"))
    stabilise_root(env)
    text = (env.home / ROOT_NAMER_FILE).read_text()
    assert len(text) == 65 and text.endswith("\n")


def test_bad_namer_key_file(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h")
    stabilise_root(env)
    (env.home / ROOT_NAMER_FILE).write_text("not a key\n")
    reset_roots()
    with pytest.raises(IllegalKey):
        get_root_namer(env)


def test_corrupt_root_representation(tmp_path):
    env = RuntimeConfig(home=tmp_path / "h")
    stabilise_root(env)
    (env.home / ROOT_STORE_FILE).write_bytes(b"<<<")
    reset_roots()
    with pytest.raises(StoreNotFound):
        get_root_store(env)


def test_unwritable_home(tmp_path):
    (tmp_path / "file").write_text("")
    env = RuntimeConfig(home=tmp_path / "file" / "home", root_store_kind="proxy")
    with pytest.raises(RootStabilisationError):
        stabilise_root(env)
