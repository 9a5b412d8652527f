"""The ``xbase`` command line.

Every command works against the root store and root namer found under
``--home`` (or ``XBASE_HOME``) and stabilises them again before exiting, so
consecutive invocations behave like one long-running process.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from xbase import bench, codecs, netd
from xbase.core import parse_key
from xbase.errors import CannotCreateStore, ReflectError, StoreNotFound, XBaseError
from xbase.recordcast import RecordGraph, get_graph, store_graph
from xbase.root import RuntimeConfig, get_root_namer, get_root_store, stabilise_root
from xbase.stores import FilePerBlobStore, LocalStore, ProxyStore, RemoteTarget, SingleFileStore, iter_stores
from xbase.stores import ID_FILE, LOG_FILE
from xbase.xmlfrag import (
    STORE_FEEDBACK,
    STRATEGIES,
    Fragment,
    XmlEntity,
    fragment_filename,
    get_xml_entity,
    reflect_xml,
    reify_xml,
    store_xml_entity,
    update_xml_entity,
)

log = logging.getLogger("xbase")


def _env(args) -> RuntimeConfig:
    return RuntimeConfig.from_env(
        home=args.home, port=args.port, node_ip=args.node_ip, root_store_kind=args.root_kind,
    )


def _read_input(path: Optional[str]) -> bytes:
    if path is None or path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write_output(data: bytes, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(path).write_bytes(data)


def _interpreter(name: Optional[str]):
    if name is None:
        return None
    return codecs.INTERPRETERS[name]()


def _proxy_root(env: RuntimeConfig) -> ProxyStore:
    root = get_root_store(env)
    if not isinstance(root, ProxyStore):
        raise CannotCreateStore("the root store is not a proxy; use --root-kind proxy on a fresh home")
    return root


# -- store and namer commands ----------------------------------------------

def cmd_put(args, env) -> int:
    data = _read_input(args.file)
    encrypt = _interpreter(args.encrypt)
    if encrypt is not None:
        data = encrypt(data)
    key = get_root_store(env).put(data)
    stabilise_root(env)
    print(key.hex)
    return 0


def cmd_get(args, env) -> int:
    data = get_root_store(env).get(parse_key(args.key))
    decrypt = _interpreter(args.decrypt)
    if decrypt is not None:
        data = decrypt(data)
    _write_output(data, args.out)
    return 0


def cmd_id(args, env) -> int:
    print(get_root_store(env).store_id)
    return 0


def cmd_bind(args, env) -> int:
    get_root_namer(env).bind(args.name, parse_key(args.key))
    stabilise_root(env)
    return 0


def cmd_lookup(args, env) -> int:
    namer = get_root_namer(env)
    if args.versions:
        for v, key in namer.versions(args.name):
            print(f"{v.timestamp}\t{v.seq}\t{key.hex}")
    else:
        for key in namer.lookup(args.name):
            print(key.hex)
    return 0


def cmd_unbind(args, env) -> int:
    get_root_namer(env).unbind(args.name, parse_key(args.key))
    stabilise_root(env)
    return 0


def cmd_stabilise(args, env) -> int:
    get_root_namer(env)
    stabilise_root(env)
    return 0


# -- sharing and topology --------------------------------------------------

def cmd_serve(args, env) -> int:
    root = get_root_store(env)
    daemon = netd.Daemon(args.host, env.port, iter_stores(root))
    if args.share_root:
        root.set_shareable(True)
        stabilise_root(env)
    daemon.bind()
    print(daemon.url, flush=True)
    try:
        daemon.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_share(args, env) -> int:
    flag = args.state == "on"
    if args.via:
        netd.remote_setshare(args.via, args.store_id, flag)
        return 0
    for s in iter_stores(get_root_store(env)):
        if s.store_id == args.store_id:
            s.set_shareable(flag)
            stabilise_root(env)
            return 0
    raise StoreNotFound(f"no store {args.store_id} reachable from the root store")


def _open_or_create(dirs: list[str], shareable: bool, single_file: bool) -> LocalStore:
    paths = [Path(d) for d in dirs]
    cls = SingleFileStore if single_file else FilePerBlobStore
    if any((p / ID_FILE).exists() or (p / LOG_FILE).exists() for p in paths):
        return cls.open(*paths, shareable=shareable)
    return cls.create(*paths, shareable=shareable)


def _describe(t) -> str:
    if isinstance(t, RemoteTarget):
        return f"remote\t{t.url}"
    if isinstance(t, LocalStore):
        return f"{t.style}\t{t.store_id}\t" + " ".join(str(d) for d in t.dirs)
    return f"{t.style}\t{t.store_id}"


def cmd_target(args, env) -> int:
    root = _proxy_root(env)
    if args.action == "list":
        for t in root.lookup_target():
            print(_describe(t))
        return 0
    if args.action == "add":
        if args.local:
            store = _open_or_create(args.local, args.shareable, args.single_file)
            root.add_target(store)
            print(store.store_id)
        elif args.target:
            root.add_target(RemoteTarget(args.target))
        else:
            raise ValueError("target add needs a URL or --local DIR")
    else:
        if not args.target:
            raise ValueError("target remove needs a URL or a store id")
        for t in root.lookup_target():
            if (isinstance(t, RemoteTarget) and t.url == args.target) or getattr(t, "store_id", None) == args.target:
                root.remove_target(t)
                break
        else:
            raise StoreNotFound(f"no target {args.target}")
    stabilise_root(env)
    return 0


# -- XML fragmentation -----------------------------------------------------

def _entity(doc: str, schema: Optional[str]) -> XmlEntity:
    return XmlEntity.parse(Path(doc).read_bytes(), Path(schema).read_bytes() if schema else None)


def cmd_shred(args, env) -> int:
    fragments = reify_xml(_entity(args.document, args.schema), env.node_ip)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for f in fragments:
        (out / fragment_filename(f.name)).write_bytes(f.to_bytes())
    print(len(fragments))
    return 0


def cmd_assemble(args, env) -> int:
    paths = []
    for p in map(Path, args.fragments):
        paths.extend(sorted(p.glob("*.xml")) if p.is_dir() else [p])
    entity = reflect_xml([p.read_bytes() for p in paths])
    _write_output(codecs.canonical_xml(entity.document), args.out)
    return 0


def cmd_xstore(args, env) -> int:
    entity = _entity(args.document, args.schema)
    name = store_xml_entity(entity, get_root_store(env), get_root_namer(env), env.node_ip)
    stabilise_root(env)
    print(name)
    return 0


def cmd_xget(args, env) -> int:
    entity = get_xml_entity(args.name, get_root_store(env), get_root_namer(env))
    _write_output(codecs.canonical_xml(entity.document), args.out)
    return 0


def cmd_xupdate(args, env) -> int:
    store, namer = get_root_store(env), get_root_namer(env)
    entity = get_xml_entity(args.name, store, namer)
    entity.document = codecs.parse_xml(Path(args.document).read_bytes())
    if args.schema:
        entity.schema = codecs.parse_xml(Path(args.schema).read_bytes())
    report = update_xml_entity(entity, store, namer, args.strategy, env.node_ip)
    stabilise_root(env)
    print(f"new blobs: {report.new_fragments}")
    print(f"rebound: {len(report.rebound)}")
    for name in report.rebound:
        print(f"  {name}")
    return 0


# -- record graphs ---------------------------------------------------------

def cmd_gstore(args, env) -> int:
    try:
        g = RecordGraph.from_json(_read_input(args.file).decode())
    except (ValueError, KeyError, TypeError) as exc:
        raise ReflectError(f"bad record-graph file: {exc}") from None
    name, _ = store_graph(g, get_root_store(env), get_root_namer(env), env.node_ip)
    stabilise_root(env)
    print(name)
    return 0


def cmd_gget(args, env) -> int:
    g = get_graph(args.name, get_root_store(env), get_root_namer(env))
    _write_output((g.to_json() + "\n").encode(), args.out)
    return 0


# -- bench -----------------------------------------------------------------

def cmd_bench(args, env) -> int:
    if args.scenario == "xbasemembers":
        rows = {
            "granularity schema": bench.bench_space(True),
            "default schema": bench.bench_space(False),
        }
        if args.json:
            print(json.dumps({k: {**vars(v), "total_bytes": v.total_bytes} for k, v in rows.items()}, indent=2))
        else:
            print(bench.format_space(rows))
        return 0
    rows = bench.bench_update_table()
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        print(bench.format_updates(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="xbase", description="Content-addressed storage, naming and XML fragmentation.")
    p.add_argument("--home", type=Path, help="directory holding the root store (default $XBASE_HOME or ./xbase-home)")
    p.add_argument("--port", type=int, help="daemon port (default $XBASE_PORT or 17000)")
    p.add_argument("--node-ip", help="address used in generated fragment names (default $XBASE_NODE_IP)")
    p.add_argument("--root-kind", choices=("local", "proxy"), help="kind of a freshly made root store")
    p.add_argument("-v", "--verbose", action="store_true", help="log forwarding decisions to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("put", help="store bytes from stdin or --file; prints the key")
    s.add_argument("--file")
    s.add_argument("--encrypt", choices=sorted(codecs.INTERPRETERS))
    s.set_defaults(func=cmd_put)

    s = sub.add_parser("get", help="write the bytes bound to KEY to stdout")
    s.add_argument("key")
    s.add_argument("--decrypt", choices=sorted(codecs.INTERPRETERS))
    s.add_argument("--out")
    s.set_defaults(func=cmd_get)

    s = sub.add_parser("id", help="print the root store id")
    s.set_defaults(func=cmd_id)

    for name, func, help_ in [("bind", cmd_bind, "bind NAME to KEY"), ("unbind", cmd_unbind, "remove a binding")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("name")
        s.add_argument("key")
        s.set_defaults(func=func)

    s = sub.add_parser("lookup", help="print the keys bound to NAME")
    s.add_argument("name")
    s.add_argument("--versions", action="store_true", help="print timestamp, sequence and key per version")
    s.set_defaults(func=cmd_lookup)

    s = sub.add_parser("stabilise", help="write the root store and namer representations")
    s.set_defaults(func=cmd_stabilise)

    s = sub.add_parser("serve", help="run the daemon for the root store and its local targets")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--share-root", action="store_true", help="make the root store shareable first")
    s.set_defaults(func=cmd_serve)

    s = sub.add_parser("share", help="switch a store's shareability")
    s.add_argument("store_id")
    s.add_argument("state", choices=("on", "off"))
    s.add_argument("--via", help="daemon URL hosting the store, for remote stores")
    s.set_defaults(func=cmd_share)

    s = sub.add_parser("target", help="edit the targets of a proxy root store")
    s.add_argument("action", choices=("add", "remove", "list"))
    s.add_argument("target", nargs="?", help="http://host:port[/store-id], or a store id for remove")
    s.add_argument("--local", nargs="+", metavar="DIR", help="add a local store on DIR (created if new)")
    s.add_argument("--shareable", action="store_true")
    s.add_argument("--single-file", action="store_true")
    s.set_defaults(func=cmd_target)

    s = sub.add_parser("shred", help="write the fragments of an XML document as files")
    s.add_argument("document")
    s.add_argument("--schema")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_shred)

    s = sub.add_parser("assemble", help="rebuild a document from fragment files or directories")
    s.add_argument("fragments", nargs="+")
    s.add_argument("--out")
    s.set_defaults(func=cmd_assemble)

    s = sub.add_parser("xstore", help="shred, store and name an XML document; prints the root name")
    s.add_argument("document")
    s.add_argument("--schema")
    s.set_defaults(func=cmd_xstore)

    s = sub.add_parser("xget", help="reassemble a stored document by its root name")
    s.add_argument("name")
    s.add_argument("--out")
    s.set_defaults(func=cmd_xget)

    s = sub.add_parser("xupdate", help="store a changed version of a named document")
    s.add_argument("name")
    s.add_argument("document")
    s.add_argument("--schema")
    s.add_argument("--strategy", choices=STRATEGIES, default=STORE_FEEDBACK)
    s.set_defaults(func=cmd_xupdate)

    s = sub.add_parser("gstore", help="store a record graph from a JSON file; prints the root name")
    s.add_argument("file", nargs="?")
    s.set_defaults(func=cmd_gstore)

    s = sub.add_parser("gget", help="print a stored record graph as JSON")
    s.add_argument("name")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gget)

    s = sub.add_parser("bench", help="reproduce the XBaseMembers counts and update decisions")
    s.add_argument("scenario", choices=("xbasemembers", "update"))
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args, _env(args))
    except XBaseError as exc:
        print(f"xbase: {exc}", file=sys.stderr)
        return exc.kind.exit_code
    except (OSError, ValueError) as exc:
        print(f"xbase: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
