"""Casters and interpreters.

Also home of the XML plumbing every XML-producing component shares:
:func:`parse_xml` keeps qualified names exactly as written (``xsd:element``
stays ``xsd:element``) and :func:`canonical_xml` is the one serialisation
used for keys, comparisons and golden files.
"""
from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Sequence
from xml.parsers import expat

from xbase.core import BitString, Caster, Interpreter, Key, Store, VersionTuple, check_name, parse_key
from xbase.errors import IllegalKey, InterpretationError, ReflectError, ReifyError, XBaseError
from xbase.namer import Namer

XML_DECLARATION = b'<?xml version="1.0" encoding="UTF-8"?>\n'


# -- XML plumbing -----------------------------------------------------------

def parse_xml(data: bytes | str, error: type[XBaseError] = ReflectError) -> ET.Element:
    """Parse without namespace processing; comments and PIs are dropped."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    parser = expat.ParserCreate()
    parser.ordered_attributes = True
    stack: list[ET.Element] = []
    root: list[ET.Element] = []
    last: list[Optional[ET.Element]] = [None]  # element whose tail receives text

    def start(tag, attrs):
        el = ET.Element(tag, dict(zip(attrs[::2], attrs[1::2])))
        if stack:
            stack[-1].append(el)
        else:
            root.append(el)
        stack.append(el)
        last[0] = None

    def end(tag):
        last[0] = stack.pop()

    def chars(text):
        if not stack:
            return
        if last[0] is not None:
            last[0].tail = (last[0].tail or "") + text
        else:
            stack[-1].text = (stack[-1].text or "") + text

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise error(f"malformed XML: {exc}") from None
    if not root:
        raise error("no document element")
    return root[0]


def local_name(tag: str) -> str:
    return tag.rsplit(":", 1)[-1]


def _esc_text(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace("\r", "&#13;")


def _esc_attr(s: str) -> str:
    return (_esc_text(s).replace('"', "&quot;")
            .replace("\n", "&#10;").replace("\t", "&#9;"))


def _is_blank(s: Optional[str]) -> bool:
    return s is None or not s.strip()


def _open_tag(el: ET.Element) -> str:
    attrs = "".join(f' {k}="{_esc_attr(v)}"' for k, v in el.attrib.items())
    return f"<{el.tag}{attrs}"


def _inline(el: ET.Element, out: list[str]) -> None:
    if len(el) == 0 and not el.text:
        out.append(_open_tag(el) + "/>")
    else:
        # blank text between child elements only counts inside mixed content
        keep = len(el) == 0 or _mixed(el)
        out.append(_open_tag(el) + ">")
        if el.text and keep:
            out.append(_esc_text(el.text))
        for child in el:
            _inline(child, out)
            if child.tail and keep:
                out.append(_esc_text(child.tail))
        out.append(f"</{el.tag}>")


def _mixed(el: ET.Element) -> bool:
    return not _is_blank(el.text) or any(not _is_blank(c.tail) for c in el)


def _pretty(el: ET.Element, depth: int, out: list[str]) -> None:
    pad = "  " * depth
    if len(el) == 0 or _mixed(el):
        parts: list[str] = []
        _inline(el, parts)
        out.append(pad + "".join(parts))
        return
    out.append(pad + _open_tag(el) + ">")
    for child in el:
        _pretty(child, depth + 1, out)
    out.append(f"{pad}</{el.tag}>")


def canonical_xml(el: ET.Element, declaration: bool = True) -> bytes:
    """UTF-8, attributes in stored order, 2-space indent, LF newlines.

    Whitespace-only text between elements is dropped; any other text is kept
    verbatim (elements with mixed content are written on one line).
    """
    lines: list[str] = []
    _pretty(el, 0, lines)
    body = ("\n".join(lines) + "\n").encode("utf-8")
    return XML_DECLARATION + body if declaration else body


def canonical(data: bytes | str | ET.Element) -> bytes:
    """Canonical bytes of a document given as bytes, text or element."""
    el = data if isinstance(data, ET.Element) else parse_xml(data)
    return canonical_xml(el)


# -- interpreters and the bytes caster --------------------------------------

def interpret_invert(b: BitString) -> BitString:
    return bytes(b)[::-1]


class InversionInterpreter(Interpreter):
    """Reverses the byte order; encryption and decryption are the same step."""

    def interpret(self, rep: BitString) -> BitString:
        return interpret_invert(rep)


InversionEncryptor = InversionInterpreter
InversionDecryptor = InversionInterpreter

INTERPRETERS: dict[str, type[Interpreter]] = {"invert": InversionInterpreter}


def bytes_reify(b: BitString) -> BitString:
    return bytes(b)


def bytes_reflect(b: BitString) -> BitString:
    return bytes(b)


class BytesCaster(Caster):
    def reify(self, entity: BitString) -> BitString:
        return bytes_reify(entity)

    def reflect(self, rep: BitString) -> BitString:
        return bytes_reflect(rep)


class InterpretedCaster(Caster):
    """Wraps a caster with an encrypting interpreter on the way out and the
    matching decrypting interpreter on the way back."""

    def __init__(self, caster: Caster, encrypt: Sequence[Interpreter] = (), decrypt: Sequence[Interpreter] = ()):
        self.caster = caster
        self.encrypt = list(encrypt)
        self.decrypt = list(decrypt)

    def reify(self, entity) -> BitString:
        rep = self.caster.reify(entity)
        for i in self.encrypt:
            rep = i.interpret(rep)
        return rep

    def reflect(self, rep: BitString):
        """Undo the interpreters, then reflect.

        A representation the inner caster cannot read means the
        interpretation did not give the desired result.
        """
        try:
            for i in self.decrypt:
                rep = i.interpret(rep)
        except XBaseError:
            raise
        except Exception as exc:
            raise InterpretationError(f"{type(exc).__name__}: {exc}") from exc
        try:
            return self.caster.reflect(rep)
        except ReflectError as exc:
            raise InterpretationError(f"interpreted representation is unreadable ({exc})") from exc


# -- store caster -----------------------------------------------------------

def _sub(parent: ET.Element, tag: str, text: Optional[str] = None, **attrs) -> ET.Element:
    el = ET.SubElement(parent, tag, attrs)
    if text is not None:
        el.text = text
    return el


def _store_element(store: Store, counter: list[int], active: set[int]) -> ET.Element:
    from xbase.stores import LocalStore, ProxyStore, RemoteTarget

    if id(store) in active:
        raise ReifyError("proxy targets form a cycle; the store cannot be flattened")
    counter[0] += 1
    ident = str(counter[0])
    flag = "true" if store.shareable else "false"
    if isinstance(store, LocalStore):
        attrs = {"ID": ident, "SHAREABLE": flag}
        if store.style != "file-per-blob":
            attrs["STYLE"] = store.style
        el = ET.Element("local", attrs)
        for i, b in enumerate(store.backing(), 1):
            bs = _sub(el, "backingStorage", ID=str(i))
            _sub(bs, "url", b.url)
            files = _sub(bs, "files")
            for j, name in enumerate(b.files, 1):
                _sub(files, "file", name, ID=str(j))
        return el
    if isinstance(store, ProxyStore):
        el = ET.Element("network", {"ID": ident, "SHAREABLE": flag})
        locals_ = _sub(el, "localStores")
        remotes = _sub(el, "remoteNodes")
        active.add(id(store))
        for t in store.lookup_target():
            if isinstance(t, RemoteTarget):
                _sub(remotes, "url", t.url)
            else:
                locals_.append(_store_element(t, counter, active))
        active.discard(id(store))
        return el
    raise ReifyError(f"cannot flatten a {type(store).__name__}")


def store_reify(store: Store) -> BitString:
    """Flatten a store into its XML representation.

    Store elements are numbered in document order; ``backingStorage`` and
    ``file`` entries are numbered within their parent.
    """
    try:
        return canonical_xml(_store_element(store, [0], set()))
    except ReifyError:
        raise
    except Exception as exc:
        raise ReifyError(f"cannot flatten store: {exc}") from exc


def _flag(el: ET.Element) -> bool:
    value = el.get("SHAREABLE")
    if value not in ("true", "false"):
        raise ReflectError(f"<{el.tag}> SHAREABLE must be true or false, got {value!r}")
    return value == "true"


def _child(el: ET.Element, tag: str) -> Optional[ET.Element]:
    found = [c for c in el if c.tag == tag]
    if len(found) > 1:
        raise ReflectError(f"<{el.tag}> has more than one <{tag}>")
    return found[0] if found else None


def _reflect_store(el: ET.Element):
    from xbase.stores import FilePerBlobStore, ProxyStore, RemoteTarget, SingleFileStore, url_to_path

    if el.get("ID") is None:
        raise ReflectError(f"<{el.tag}> lacks an ID")
    shareable = _flag(el)
    if el.tag == "local":
        style = el.get("STYLE", "file-per-blob")
        cls = {"file-per-blob": FilePerBlobStore, "single-file": SingleFileStore}.get(style)
        if cls is None:
            raise ReflectError(f"unknown local store style {style!r}")
        dirs = []
        for bs in el:
            if bs.tag != "backingStorage":
                raise ReflectError(f"unexpected <{bs.tag}> in <local>")
            url = _child(bs, "url")
            if url is None or not (url.text or "").strip():
                raise ReflectError("<backingStorage> without <url>")
            # <files> is a snapshot taken at reification; the directory is authoritative
            files = _child(bs, "files")
            if files is not None and any(f.tag != "file" for f in files):
                raise ReflectError("<files> holds only <file> entries")
            try:
                dirs.append(url_to_path(url.text.strip()))
            except ValueError as exc:
                raise ReflectError(str(exc)) from None
        if not dirs:
            raise ReflectError("<local> without backing storage")
        return cls.open(*dirs, shareable=shareable)
    if el.tag == "network":
        proxy = ProxyStore(shareable=shareable)
        for part in el:
            if part.tag == "localStores":
                for sub in part:
                    proxy.add_target(_reflect_store(sub))
            elif part.tag == "remoteNodes":
                for u in part:
                    if u.tag != "url":
                        raise ReflectError(f"unexpected <{u.tag}> in <remoteNodes>")
                    try:
                        proxy.add_target(RemoteTarget((u.text or "").strip()))
                    except ValueError as exc:
                        raise ReflectError(str(exc)) from None
            else:
                raise ReflectError(f"unexpected <{part.tag}> in <network>")
        return proxy
    raise ReflectError(f"<{el.tag}> is not a store representation")


def store_reflect(rep: BitString) -> Store:
    """Rebuild a store from its XML representation.

    Local stores are reopened over the listed backing directories, so the
    store they describe must exist (:class:`StoreNotFound` otherwise).
    """
    return _reflect_store(parse_xml(rep))


class StoreCaster(Caster):
    def reify(self, entity: Store) -> BitString:
        return store_reify(entity)

    def reflect(self, rep: BitString) -> Store:
        return store_reflect(rep)


# -- namer caster -----------------------------------------------------------

def namer_reify(namer: Namer) -> BitString:
    root = ET.Element("namer")
    try:
        for vt, key in namer.history():
            _sub(root, "binding", name=vt.name, key=key.hex,
                 timestamp=str(vt.timestamp), seq=str(vt.seq))
    except Exception as exc:
        raise ReifyError(f"cannot flatten namer: {exc}") from exc
    return canonical_xml(root)


def namer_reflect(rep: BitString) -> Namer:
    root = parse_xml(rep)
    if root.tag != "namer":
        raise ReflectError(f"<{root.tag}> is not a namer representation")
    namer = Namer()
    for b in root:
        if b.tag != "binding":
            raise ReflectError(f"unexpected <{b.tag}> in <namer>")
        try:
            vt = VersionTuple(check_name(b.get("name")), int(b.get("timestamp")), int(b.get("seq")))
            key = parse_key(b.get("key"))
        except (TypeError, ValueError, IllegalKey) as exc:
            raise ReflectError(f"bad binding {b.attrib}: {exc}") from None
        namer.bind_versioned(vt, key)
    return namer


class NamerCaster(Caster):
    def reify(self, entity: Namer) -> BitString:
        return namer_reify(entity)

    def reflect(self, rep: BitString) -> Namer:
        return namer_reflect(rep)


def key_reify(key: Key) -> BitString:
    return key.hex.encode("ascii")


def key_reflect(rep: BitString) -> Key:
    try:
        return parse_key(rep.decode("ascii").strip())
    except (UnicodeDecodeError, IllegalKey) as exc:
        raise ReflectError(str(exc)) from None
