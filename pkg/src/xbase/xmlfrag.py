"""Schema-driven shredding of XML documents into named fragments.

The granularity schema marks cut points: every ``<xsd:element ref="...">``
yields a separate fragment for each document element found at that
position.  In its parent the element is replaced by ``<XBaseRef ref="NAME"/>``
and the element itself is wrapped as ``<XBaseName ref="NAME">``.  The
document root is wrapped with an extra ``schemaRef`` attribute naming the
fragment that carries the schema.

Fragment names are system ids built from the node address, the element path
and a counter.  The entity's :class:`IdMap` remembers which name belongs to
which node (element path + occurrence index), so re-shredding an edited
document reuses names and only changed fragments get new content.
"""
from __future__ import annotations

import copy
import re
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Protocol, Sequence, Union

from xbase.codecs import canonical_xml, local_name, parse_xml
from xbase.core import Store
from xbase.errors import KeyExists, KeyNotFound, NameNotFound, ReflectError, ReifyError
from xbase.namer import Namer

DEFAULT_NODE_IP = "127.0.0.1"
XSD_NS = "http://www.w3.org/2001/XMLSchema"
NAME_TAG = "XBaseName"
REF_TAG = "XBaseRef"
ROOT_KEYWORD = "OuterMostTag"

STORE_FEEDBACK = "store-feedback"
SOURCE_COMPARE = "source-compare"
STRATEGIES = (STORE_FEEDBACK, SOURCE_COMPARE)

Locator = tuple[str, int]  # (element path, occurrence index among same-path elements)


def is_name_tag(tag: str) -> bool:
    return tag.lower() == NAME_TAG.lower()


def is_ref_tag(tag: str) -> bool:
    return tag.lower() == REF_TAG.lower()


# -- identities -------------------------------------------------------------

def generate_sys_id(node_ip: str, path: str, counter: int, kind: str = "element") -> str:
    """System id for a fragment.

    >>> generate_sys_id("192.0.0.1", "/XBaseMembers/researchFellows/person", 1)
    '192.0.0.1-XBaseMembers/researchFellows/person-1'
    >>> generate_sys_id("192.0.0.1", "/XBaseMembers", 1, "root")
    '192.0.0.1-XBaseMembersOuterMostTag-1'
    """
    if counter < 1:
        raise ValueError("counters start at 1")
    steps = path.strip("/")
    if kind == "element":
        return f"{node_ip}-{steps}-{counter}"
    root = f"{node_ip}-{steps.split('/')[0]}{ROOT_KEYWORD}-{counter}"
    if kind == "root":
        return root
    if kind == "schema":
        return root + "-schema"
    raise ValueError(f"unknown id kind {kind!r}")


_COUNTER = re.compile(r"-(\d+)\Z")


@dataclass
class IdMap:
    """Node locator -> fragment name, plus the highest counter used per path."""

    names: dict[Locator, str] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.names)

    def copy(self) -> "IdMap":
        return IdMap(dict(self.names), dict(self.counters))

    @classmethod
    def from_names(cls, names: dict[Locator, str]) -> "IdMap":
        counters: dict[str, int] = {}
        for (path, _), name in names.items():
            m = _COUNTER.search(name)
            if m:
                counters[path] = max(counters.get(path, 0), int(m.group(1)))
        return cls(dict(names), counters)


# -- entity and fragments ---------------------------------------------------

@dataclass
class XmlEntity:
    document: Optional[ET.Element]
    schema: Optional[ET.Element] = None
    id_map: IdMap = field(default_factory=IdMap)

    @classmethod
    def parse(cls, document: Union[bytes, str], schema: Union[bytes, str, None] = None) -> "XmlEntity":
        return cls(
            parse_xml(document, ReifyError),
            parse_xml(schema, ReifyError) if schema is not None else None,
        )

    def document_bytes(self) -> bytes:
        return canonical_xml(self.document)


@dataclass
class Fragment:
    name: str
    kind: str  # "root" | "element" | "schema"
    body: ET.Element
    schema_ref: Optional[str] = None

    def to_element(self) -> ET.Element:
        attrs = {"ref": self.name}
        if self.schema_ref is not None:
            attrs["schemaRef"] = self.schema_ref
        wrapper = ET.Element(NAME_TAG, attrs)
        body = copy.deepcopy(self.body)
        body.tail = None
        wrapper.append(body)
        return wrapper

    def to_bytes(self) -> bytes:
        return canonical_xml(self.to_element())

    @classmethod
    def from_bytes(cls, data: Union[bytes, str]) -> "Fragment":
        return cls.from_element(parse_xml(data, ReflectError))

    @classmethod
    def from_element(cls, wrapper: ET.Element) -> "Fragment":
        if not is_name_tag(wrapper.tag):
            raise ReflectError(f"fragment root is <{wrapper.tag}>, expected <{NAME_TAG}>")
        name = wrapper.get("ref")
        if not name:
            raise ReflectError("fragment without a ref name")
        kids = list(wrapper)
        if len(kids) != 1 or (wrapper.text or "").strip() or (kids[0].tail or "").strip():
            raise ReflectError(f"fragment {name} must wrap exactly one element")
        body = kids[0]
        schema_ref = wrapper.get("schemaRef")
        if schema_ref is not None:
            kind = "root"
        elif local_name(body.tag) == "schema":
            kind = "schema"
        else:
            kind = "element"
        return cls(name, kind, body, schema_ref)


def as_fragment(f: Union[Fragment, bytes, str]) -> Fragment:
    return f if isinstance(f, Fragment) else Fragment.from_bytes(f)


# -- granularity schemas ----------------------------------------------------

class SchemaModel:
    """The supported schema subset: element (name/ref), complexType, sequence."""

    def __init__(self, schema: ET.Element):
        if local_name(schema.tag) != "schema":
            raise ReifyError(f"granularity rules must be a schema, got <{schema.tag}>")
        self.top: dict[str, ET.Element] = {}
        for decl in schema:
            if local_name(decl.tag) != "element":
                raise ReifyError(f"unsupported schema construct <{decl.tag}> at top level")
            name = (decl.get("name") or "").strip()
            if not name:
                raise ReifyError("top-level element declaration without a name")
            self.top[name] = decl
        self._children: dict[int, Optional[list[ET.Element]]] = {}

    def children(self, decl: ET.Element) -> Optional[list[ET.Element]]:
        """Element declarations nested in ``decl``; None means any content."""
        key = id(decl)
        if key not in self._children:
            self._children[key] = self._collect(decl)
        return self._children[key]

    def _collect(self, decl: ET.Element) -> Optional[list[ET.Element]]:
        found: Optional[list[ET.Element]] = None
        for part in decl:
            if local_name(part.tag) != "complexType":
                raise ReifyError(f"unsupported schema construct <{part.tag}> in element declaration")
            found = found or []
            for seq in part:
                if local_name(seq.tag) != "sequence":
                    raise ReifyError(f"unsupported schema construct <{seq.tag}> in complexType")
                found.extend(self._sequence(seq))
        return found

    def _sequence(self, seq: ET.Element) -> Iterator[ET.Element]:
        for item in seq:
            ln = local_name(item.tag)
            if ln == "element":
                if not (item.get("ref") or item.get("name") or "").strip():
                    raise ReifyError("element declaration needs name= or ref=")
                yield item
            elif ln == "sequence":
                yield from self._sequence(item)
            else:
                raise ReifyError(f"unsupported schema construct <{item.tag}> in sequence")

    def resolve(self, decl: ET.Element) -> tuple[str, ET.Element, bool]:
        """(element name, defining declaration, is_ref) for a nested declaration."""
        ref = (decl.get("ref") or "").strip()
        if ref:
            if ref not in self.top:
                raise ReifyError(f"reference to undefined element {ref!r}")
            return ref, self.top[ref], True
        return decl.get("name").strip(), decl, False

    def roots(self) -> list[str]:
        referenced = set()
        for decl in self.top.values():
            stack = [decl]
            while stack:
                for d in self.children(stack.pop()) or ():
                    ref = (d.get("ref") or "").strip()
                    if ref:
                        referenced.add(ref)
                    else:
                        stack.append(d)
        roots = [n for n in self.top if n not in referenced]
        return roots or list(self.top)[:1]

    def ref_paths(self, root: Optional[str] = None) -> set[str]:
        roots = [root] if root is not None else self.roots()
        paths: set[str] = set()
        for r in roots:
            if r not in self.top:
                raise ReifyError(f"document element <{r}> is not declared in the schema")
            self._walk(self.top[r], "/" + r, (r,), paths)
        return paths

    def _walk(self, decl: ET.Element, path: str, chain: tuple[str, ...], paths: set[str]) -> None:
        for d in self.children(decl) or ():
            name, definition, is_ref = self.resolve(d)
            p = f"{path}/{name}"
            if is_ref:
                if name in chain:
                    raise ReifyError(f"recursive reference to {name!r} is not supported")
                paths.add(p)
                self._walk(definition, p, chain + (name,), paths)
            else:
                self._walk(definition, p, chain, paths)

    def validate(self, document: ET.Element) -> None:
        if document.tag not in self.top:
            raise ReifyError(f"document element <{document.tag}> is not declared in the schema")
        self._check(document, self.top[document.tag], "/" + document.tag)

    def _check(self, el: ET.Element, decl: ET.Element, path: str) -> None:
        allowed = self.children(decl)
        if allowed is None:
            return
        by_name = {}
        for d in allowed:
            name, definition, _ = self.resolve(d)
            by_name[name] = definition
        for child in el:
            if child.tag not in by_name:
                raise ReifyError(f"document does not match the schema: <{child.tag}> not allowed at {path}")
            self._check(child, by_name[child.tag], f"{path}/{child.tag}")


def collect_ref_paths(schema: ET.Element, root: Optional[str] = None) -> set[str]:
    """Full document paths at which the schema places a ``ref=`` cut point."""
    return SchemaModel(schema).ref_paths(root)


def default_schema(document: ET.Element) -> ET.Element:
    """A schema declaring only the document element: the whole document is one fragment."""
    schema = ET.Element("xsd:schema", {"xmlns:xsd": XSD_NS})
    ET.SubElement(schema, "xsd:element", {"name": document.tag})
    return schema


# -- reify / reflect --------------------------------------------------------

def _preorder(el: ET.Element, path: str) -> Iterator[tuple[ET.Element, str]]:
    yield el, path
    for child in el:
        yield from _preorder(child, f"{path}/{child.tag}")


def locate(document: ET.Element) -> list[tuple[ET.Element, Locator]]:
    """Every element with its locator, in document order."""
    counts: dict[str, int] = defaultdict(int)
    out = []
    for el, path in _preorder(document, "/" + document.tag):
        out.append((el, (path, counts[path])))
        counts[path] += 1
    return out


class _Namer:
    def __init__(self, id_map: IdMap, node_ip: str, is_taken: Optional[Callable[[str], bool]]):
        self.id_map = id_map
        self.node_ip = node_ip
        self.is_taken = is_taken
        self.used = set(id_map.names.values())
        self.live: dict[Locator, str] = {}

    def name(self, loc: Locator, kind: str) -> str:
        name = self.id_map.names.get(loc)
        if name is None:
            path = loc[0]
            counter = self.id_map.counters.get(path, 0)
            while True:
                counter += 1
                name = generate_sys_id(self.node_ip, path, counter, kind)
                if name in self.used or (self.is_taken is not None and self.is_taken(name)):
                    continue
                if kind == "root" and self.is_taken is not None and self.is_taken(name + "-schema"):
                    continue
                break
            self.id_map.counters[path] = counter
            self.id_map.names[loc] = name
            self.used.add(name)
        self.live[loc] = name
        return name


def reify_xml(entity: XmlEntity, node_ip: str = DEFAULT_NODE_IP,
              is_taken: Optional[Callable[[str], bool]] = None,
              schema_policy: str = "default") -> list[Fragment]:
    """Shred ``entity`` into fragments: root first, then the schema, then
    element fragments in document order.

    ``entity.id_map`` is updated in place: new nodes get fresh names (skipping
    any name for which ``is_taken`` answers true), vanished nodes are pruned.
    """
    doc = entity.document
    if doc is None:
        raise ReifyError("no document to reify")
    schema = entity.schema
    if schema is None:
        if schema_policy == "error":
            raise ReifyError("no granularity schema given")
        schema = default_schema(doc)
    model = SchemaModel(schema)
    model.validate(doc)
    paths = model.ref_paths(doc.tag)

    work = copy.deepcopy(doc)
    located = locate(work)
    loc_of = {id(el): loc for el, loc in located}
    order = {id(el): i for i, (el, _) in enumerate(located)}
    ids = _Namer(entity.id_map, node_ip, is_taken)
    root_name = ids.name(("/" + doc.tag, 0), "root")

    shredded: list[tuple[int, Fragment]] = []

    def visit(el: ET.Element, path: str) -> None:
        for i, child in enumerate(list(el)):
            cpath = f"{path}/{child.tag}"
            visit(child, cpath)  # deepest first
            if cpath in paths:
                name = ids.name(loc_of[id(child)], "element")
                ref = ET.Element(REF_TAG, {"ref": name})
                ref.tail, child.tail = child.tail, None
                el[i] = ref
                shredded.append((order[id(child)], Fragment(name, "element", child)))

    visit(work, "/" + work.tag)
    entity.id_map.names = dict(ids.live)

    schema_name = root_name + "-schema"
    work.tail = None
    fragments = [
        Fragment(root_name, "root", work, schema_ref=schema_name),
        Fragment(schema_name, "schema", copy.deepcopy(schema)),
    ]
    fragments.extend(f for _, f in sorted(shredded, key=lambda p: p[0]))
    return fragments


class FragmentResolver(Protocol):
    def resolve(self, name: str) -> Union[Fragment, bytes, None]: ...


class MappingResolver:
    """Resolves names against an in-memory set of fragments."""

    def __init__(self, fragments: Iterable[Union[Fragment, bytes]] = ()):
        self.fragments = {f.name: f for f in map(as_fragment, fragments)}

    def resolve(self, name: str) -> Optional[Fragment]:
        return self.fragments.get(name)


class NamerStoreResolver:
    """Resolves a name to its latest key in ``namer``, then fetches it from ``store``."""

    def __init__(self, namer: Namer, store: Store):
        self.namer = namer
        self.store = store

    def resolve(self, name: str) -> Optional[bytes]:
        try:
            return self.store.get(self.namer.lookup_latest(name))
        except (NameNotFound, KeyNotFound):
            return None


def _resolve(name: str, given: dict[str, Fragment], resolver: Optional[FragmentResolver]) -> Fragment:
    frag = given.get(name)
    if frag is None and resolver is not None:
        found = resolver.resolve(name)
        if found is not None:
            frag = as_fragment(found)
            if frag.name != name:
                raise ReflectError(f"resolver returned fragment {frag.name} for {name}")
    if frag is None:
        raise ReflectError(f"cannot resolve reference {name!r}")
    return frag


def reflect_xml(fragments: Sequence[Union[Fragment, bytes, str]],
                resolver: Optional[FragmentResolver] = None) -> XmlEntity:
    """Reassemble a document from fragments.

    References are looked up among ``fragments`` first, then through
    ``resolver``.  The id map is rebuilt from the names substituted.
    """
    parsed = [as_fragment(f) for f in fragments]
    given = {f.name: f for f in parsed}
    roots = [f for f in parsed if f.kind == "root"]
    if not roots:
        raise ReflectError("no fragment holds the outermost element")
    if len(roots) > 1:
        raise ReflectError(f"several root fragments: {[f.name for f in roots]}")
    root = roots[0]
    schema_frag = _resolve(root.schema_ref, given, resolver)
    if schema_frag.kind != "schema":
        raise ReflectError(f"{root.schema_ref} is not a schema fragment")

    doc = copy.deepcopy(root.body)
    doc.tail = None
    visited = {root.name, schema_frag.name}
    names_at: dict[int, str] = {}

    def substitute(el: ET.Element) -> None:
        for i, child in enumerate(list(el)):
            if not is_ref_tag(child.tag):
                substitute(child)
                continue
            name = child.get("ref")
            if not name:
                raise ReflectError("reference without a name")
            if name in visited:
                raise ReflectError(f"fragment {name} referenced more than once (cycle?)")
            visited.add(name)
            frag = _resolve(name, given, resolver)
            if frag.kind != "element":
                raise ReflectError(f"reference {name} points at a {frag.kind} fragment")
            body = copy.deepcopy(frag.body)
            body.tail = child.tail
            el[i] = body
            names_at[id(body)] = name
            substitute(body)

    substitute(doc)
    names = {loc: names_at[id(el)] for el, loc in locate(doc) if id(el) in names_at}
    names[("/" + doc.tag, 0)] = root.name
    return XmlEntity(doc, copy.deepcopy(schema_frag.body), IdMap.from_names(names))


# -- store / retrieve / update pipelines ------------------------------------

@dataclass
class UpdateReport:
    new_fragments: int = 0
    rebound: list[str] = field(default_factory=list)
    unchanged: list[str] = field(default_factory=list)


def put_fragments(items: Iterable[tuple[str, bytes]], store: Store, namer: Namer,
                  strategy: str = STORE_FEEDBACK) -> UpdateReport:
    """Put named fragment bytes and bind changed names to their new keys.

    ``store-feedback`` relies on content addressing: a put that fails with
    :class:`KeyExists` means the bytes are already there.  ``source-compare``
    fetches each name's current bytes and compares before putting.  A name
    is rebound whenever its latest key differs from the fragment's key, so
    both strategies pick the same names.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy is one of {STRATEGIES}")
    report = UpdateReport()
    for name, data in items:
        if strategy == SOURCE_COMPARE:
            try:
                same = store.get(namer.lookup_latest(name)) == data
            except (NameNotFound, KeyNotFound):
                same = False
            if same:
                report.unchanged.append(name)
                continue
            try:
                key = store.put(data)
                report.new_fragments += 1
            except KeyExists as exc:
                key = exc.key
            changed = True
        else:
            try:
                key = store.put(data)
                report.new_fragments += 1
                changed = True
            except KeyExists as exc:
                key = exc.key
                changed = not namer.has_name(name) or namer.lookup_latest(name) != key
        if changed:
            namer.bind(name, key)
            report.rebound.append(name)
        else:
            report.unchanged.append(name)
    return report


def store_xml_entity(entity: XmlEntity, store: Store, namer: Namer,
                     node_ip: str = DEFAULT_NODE_IP) -> str:
    """Shred, put and bind every fragment; returns the root fragment's name."""
    fragments = reify_xml(entity, node_ip, is_taken=namer.has_name)
    put_fragments(((f.name, f.to_bytes()) for f in fragments), store, namer, STORE_FEEDBACK)
    return fragments[0].name


def get_xml_entity(root_name: str, store: Store, namer: Namer) -> XmlEntity:
    root = Fragment.from_bytes(store.get(namer.lookup_latest(root_name)))
    if root.kind != "root":
        raise ReflectError(f"{root_name} does not name a root fragment")
    schema = Fragment.from_bytes(store.get(namer.lookup_latest(root.schema_ref)))
    return reflect_xml([root, schema], NamerStoreResolver(namer, store))


def update_xml_entity(entity: XmlEntity, store: Store, namer: Namer,
                      strategy: str = STORE_FEEDBACK, node_ip: str = DEFAULT_NODE_IP) -> UpdateReport:
    fragments = reify_xml(entity, node_ip, is_taken=namer.has_name)
    return put_fragments(((f.name, f.to_bytes()) for f in fragments), store, namer, strategy)


def fragment_filename(name: str) -> str:
    return name.replace("/", "_") + ".xml"
