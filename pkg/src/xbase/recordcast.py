"""Casting record graphs (typed nodes, named fields, references) to fragments.

One fragment per reachable node::

    <XBaseName ref="10.0.0.1-person-1" type="Person">
      <fields>
        <field1>
          <name>name</name>
          <type>java.lang.String</type>
          <value>Ada</value>
        </field1>
        <field2>
          <name>address</name>
          <type>Address</type>
          <value>
            <XBaseRef ref="10.0.0.1-address-1"/>
          </value>
        </field2>
      </fields>
      <code>10.0.0.1-class_person-1</code>
    </XBaseName>

Code payloads are optional opaque bytes kept in their own fragment
(``<code><className/><bytes/></code>``, bytes base64-encoded).  They are
stored and returned, never loaded.
"""
from __future__ import annotations

import base64
import hashlib
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence, Union

from xbase.codecs import canonical_xml, parse_xml
from xbase.core import Store
from xbase.errors import ReflectError, ReifyError
from xbase.namer import Namer
from xbase.xmlfrag import (
    DEFAULT_NODE_IP,
    NAME_TAG,
    REF_TAG,
    STORE_FEEDBACK,
    FragmentResolver,
    NamerStoreResolver,
    UpdateReport,
    is_name_tag,
    is_ref_tag,
    put_fragments,
)

NodeId = Hashable


@dataclass(frozen=True)
class Ref:
    """A field value pointing at another node."""

    node: NodeId


@dataclass
class Field:
    name: str
    declared_type: str
    value: Union[str, Ref]


@dataclass
class RecordNode:
    id: NodeId
    type_name: str
    fields: list[Field] = field(default_factory=list)
    code: Optional[bytes] = None

    def __post_init__(self) -> None:
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate field names on node {self.id!r}")

    def field(self, name: str) -> Field:
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)


@dataclass
class RecordGraph:
    nodes: dict[NodeId, RecordNode]
    root: NodeId
    id_map: dict = field(default_factory=dict)  # node id or code key -> fragment name
    counters: dict[str, int] = field(default_factory=dict)

    @classmethod
    def of(cls, nodes: Iterable[RecordNode], root: NodeId) -> "RecordGraph":
        return cls({n.id: n for n in nodes}, root)

    def reachable(self) -> list[NodeId]:
        """Node ids reachable from the root, depth-first, each once."""
        seen: dict[NodeId, None] = {}
        stack = [self.root]
        while stack:
            nid = stack.pop()
            if nid in seen:
                continue
            seen[nid] = None
            node = self.nodes[nid]
            stack.extend(f.value.node for f in reversed(node.fields) if isinstance(f.value, Ref))
        return list(seen)

    # JSON file form used by the command line
    def to_json(self) -> str:
        nodes = []
        for n in self.nodes.values():
            fields = [
                {"name": f.name, "type": f.declared_type,
                 **({"ref": f.value.node} if isinstance(f.value, Ref) else {"value": f.value})}
                for f in n.fields
            ]
            entry = {"id": n.id, "type": n.type_name, "fields": fields}
            if n.code is not None:
                entry["code"] = base64.b64encode(n.code).decode()
            nodes.append(entry)
        return json.dumps({"root": self.root, "nodes": nodes}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RecordGraph":
        data = json.loads(text)
        nodes = []
        for n in data["nodes"]:
            fields = [
                Field(f["name"], f.get("type", "string"), Ref(f["ref"]) if "ref" in f else str(f["value"]))
                for f in n.get("fields", [])
            ]
            code = base64.b64decode(n["code"]) if n.get("code") is not None else None
            nodes.append(RecordNode(n["id"], n["type"], fields, code))
        return cls.of(nodes, data["root"])


def sys_id(node_ip: str, type_name: str, counter: int, code: bool = False) -> str:
    token = type_name.lower()
    return f"{node_ip}-class_{token}-{counter}" if code else f"{node_ip}-{token}-{counter}"


def _code_key(node: RecordNode) -> tuple:
    return ("code", node.type_name, hashlib.sha256(node.code).hexdigest())


@dataclass
class GraphFragment:
    name: str
    kind: str  # "object" | "code"
    element: ET.Element

    def to_bytes(self) -> bytes:
        return canonical_xml(self.element)


def _text(parent: ET.Element, tag: str, text: str) -> ET.Element:
    el = ET.SubElement(parent, tag)
    el.text = text
    return el


def reify_graph(g: RecordGraph, node_ip: str = DEFAULT_NODE_IP,
                is_taken=None) -> list[GraphFragment]:
    """One fragment per reachable node plus one per distinct code payload.

    The root's fragment comes first.  Names are reused from ``g.id_map``;
    new nodes get fresh ids and ``g.id_map`` is extended.
    """
    if g.root is None or g.root not in g.nodes:
        raise ReifyError("nothing to reify: the root node is missing")
    used = set(g.id_map.values())

    def fresh(key, type_name: str, code: bool) -> str:
        if key in g.id_map:
            return g.id_map[key]
        slot = ("class_" if code else "") + type_name.lower()
        n = g.counters.get(slot, 0)
        while True:
            n += 1
            name = sys_id(node_ip, type_name, n, code)
            if name not in used and not (is_taken and is_taken(name)):
                break
        g.counters[slot] = n
        g.id_map[key] = name
        used.add(name)
        return name

    try:
        order = g.reachable()
    except KeyError as exc:
        raise ReifyError(f"reference to unknown node {exc.args[0]!r}") from None
    for nid in order:  # every reachable node is named before any reference is written
        fresh(nid, g.nodes[nid].type_name, False)

    out: list[GraphFragment] = []
    code_done: set = set()
    for nid in order:
        node = g.nodes[nid]
        name = g.id_map[nid]
        wrapper = ET.Element(NAME_TAG, {"ref": name, "type": node.type_name})
        fields_el = ET.SubElement(wrapper, "fields")
        for i, f in enumerate(node.fields, 1):
            fe = ET.SubElement(fields_el, f"field{i}")
            _text(fe, "name", f.name)
            _text(fe, "type", f.declared_type)
            value = ET.SubElement(fe, "value")
            if isinstance(f.value, Ref):
                ET.SubElement(value, REF_TAG, {"ref": g.id_map[f.value.node]})
            else:
                value.text = f.value
        if node.code is not None:
            ck = _code_key(node)
            code_name = fresh(ck, node.type_name, True)
            _text(wrapper, "code", code_name)
            if ck not in code_done:
                code_done.add(ck)
                cw = ET.Element(NAME_TAG, {"ref": code_name})
                ce = ET.SubElement(cw, "code")
                _text(ce, "className", node.type_name)
                _text(ce, "bytes", base64.b64encode(node.code).decode("ascii"))
                out.append(GraphFragment(code_name, "code", cw))
        out.append(GraphFragment(name, "object", wrapper))
    live = set(order) | code_done
    g.id_map = {k: v for k, v in g.id_map.items() if k in live}
    # traversal order starts at the root, so the root's fragment leads
    return [f for f in out if f.kind == "object"] + [f for f in out if f.kind == "code"]


def _parse(f: Union[GraphFragment, bytes, str]) -> tuple[str, ET.Element]:
    el = f.element if isinstance(f, GraphFragment) else parse_xml(f, ReflectError)
    if not is_name_tag(el.tag) or not el.get("ref"):
        raise ReflectError(f"not a fragment: <{el.tag}>")
    return el.get("ref"), el


def reflect_graph(fragments: Sequence[Union[GraphFragment, bytes, str]],
                  resolver: Optional[FragmentResolver] = None,
                  root: Optional[str] = None) -> RecordGraph:
    """Rebuild a graph; node ids are the fragment names.

    The root is ``root`` if given, else the first object fragment.  Shared
    references resolve to one node, cycles are reproduced.
    """
    given: dict[str, ET.Element] = {}
    for f in fragments:
        name, el = _parse(f)
        given[name] = el
    if root is None:
        objects = [n for n, el in given.items() if el.find("fields") is not None]
        if not objects:
            raise ReflectError("no object fragment given")
        root = objects[0]

    def fetch(name: str) -> ET.Element:
        if name in given:
            return given[name]
        found = resolver.resolve(name) if resolver is not None else None
        if found is None:
            raise ReflectError(f"cannot resolve reference {name!r}")
        got, el = _parse(found.to_bytes() if hasattr(found, "to_bytes") else found)
        if got != name:
            raise ReflectError(f"resolver returned fragment {got} for {name}")
        given[name] = el
        return el

    nodes: dict[str, RecordNode] = {}
    pending = [root]
    while pending:
        name = pending.pop()
        if name in nodes:  # visited: shared or cyclic reference
            continue
        el = fetch(name)
        fields_el = el.find("fields")
        type_name = el.get("type")
        if fields_el is None or not type_name:
            raise ReflectError(f"{name} is not an object fragment")
        fields = []
        for fe in fields_el:
            fname, ftype, value = fe.find("name"), fe.find("type"), fe.find("value")
            if fname is None or ftype is None or value is None:
                raise ReflectError(f"malformed field <{fe.tag}> in {name}")
            refs = [c for c in value if is_ref_tag(c.tag)]
            if refs:
                target = refs[0].get("ref")
                if not target:
                    raise ReflectError(f"reference without a name in {name}")
                fields.append(Field(fname.text or "", ftype.text or "", Ref(target)))
                pending.append(target)
            else:
                fields.append(Field(fname.text or "", ftype.text or "", value.text or ""))
        code = None
        code_el = el.find("code")
        if code_el is not None:
            cel = fetch((code_el.text or "").strip()).find("code")
            data = cel.find("bytes") if cel is not None else None
            if data is None:
                raise ReflectError(f"bad code fragment for {name}")
            try:
                code = base64.b64decode((data.text or "").strip(), validate=True)
            except ValueError as exc:
                raise ReflectError(f"bad code bytes: {exc}") from None
        nodes[name] = RecordNode(name, type_name, fields, code)
    g = RecordGraph(nodes, root)
    g.id_map = {n: n for n in nodes}
    for node in nodes.values():
        if node.code is not None:
            g.id_map[_code_key(node)] = (given[node.id].find("code").text or "").strip()
    return g


def store_graph(g: RecordGraph, store: Store, namer: Namer, node_ip: str = DEFAULT_NODE_IP,
                strategy: str = STORE_FEEDBACK) -> tuple[str, UpdateReport]:
    """Put every fragment of ``g`` and bind changed names; returns (root name, report)."""
    frags = reify_graph(g, node_ip, is_taken=namer.has_name)
    report = put_fragments(((f.name, f.to_bytes()) for f in frags), store, namer, strategy)
    return frags[0].name, report


def get_graph(root_name: str, store: Store, namer: Namer) -> RecordGraph:
    root = store.get(namer.lookup_latest(root_name))
    return reflect_graph([root], NamerStoreResolver(namer, store), root=root_name)


def isomorphic(a: RecordGraph, b: RecordGraph) -> bool:
    """Same types, field values and reference structure (aliasing included)."""
    mapping: dict = {}
    reverse: dict = {}
    stack = [(a.root, b.root)]
    while stack:
        x, y = stack.pop()
        if x in mapping or y in reverse:
            if mapping.get(x, object()) != y or reverse.get(y, object()) != x:
                return False
            continue
        mapping[x], reverse[y] = y, x
        nx, ny = a.nodes[x], b.nodes[y]
        if nx.type_name != ny.type_name or len(nx.fields) != len(ny.fields) or nx.code != ny.code:
            return False
        for fx, fy in zip(nx.fields, ny.fields):
            if (fx.name, fx.declared_type) != (fy.name, fy.declared_type):
                return False
            if isinstance(fx.value, Ref) != isinstance(fy.value, Ref):
                return False
            if isinstance(fx.value, Ref):
                stack.append((fx.value.node, fy.value.node))
            elif fx.value != fy.value:
                return False
    return True
