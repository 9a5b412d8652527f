"""Reference implementations the tests compare the package against.

None of these import from :mod:`xbase`; they are deliberately naive.
"""
from __future__ import annotations

import random
import struct
import xml.etree.ElementTree as ET

# -- SHA-256 from FIPS 180-4, written out longhand ---------------------------

_K = [
    0x428A2F98, 0x71374491, 0xB5C0FBCF, 0xE9B5DBA5, 0x3956C25B, 0x59F111F1, 0x923F82A4, 0xAB1C5ED5,
    0xD807AA98, 0x12835B01, 0x243185BE, 0x550C7DC3, 0x72BE5D74, 0x80DEB1FE, 0x9BDC06A7, 0xC19BF174,
    0xE49B69C1, 0xEFBE4786, 0x0FC19DC6, 0x240CA1CC, 0x2DE92C6F, 0x4A7484AA, 0x5CB0A9DC, 0x76F988DA,
    0x983E5152, 0xA831C66D, 0xB00327C8, 0xBF597FC7, 0xC6E00BF3, 0xD5A79147, 0x06CA6351, 0x14292967,
    0x27B70A85, 0x2E1B2138, 0x4D2C6DFC, 0x53380D13, 0x650A7354, 0x766A0ABB, 0x81C2C92E, 0x92722C85,
    0xA2BFE8A1, 0xA81A664B, 0xC24B8B70, 0xC76C51A3, 0xD192E819, 0xD6990624, 0xF40E3585, 0x106AA070,
    0x19A4C116, 0x1E376C08, 0x2748774C, 0x34B0BCB5, 0x391C0CB3, 0x4ED8AA4A, 0x5B9CCA4F, 0x682E6FF3,
    0x748F82EE, 0x78A5636F, 0x84C87814, 0x8CC70208, 0x90BEFFFA, 0xA4506CEB, 0xBEF9A3F7, 0xC67178F2,
]
_H0 = [0x6A09E667, 0xBB67AE85, 0x3C6EF372, 0xA54FF53A, 0x510E527F, 0x9B05688C, 0x1F83D9AB, 0x5BE0CD19]


def _rotr(x: int, n: int) -> int:
    return ((x >> n) | (x << (32 - n))) & 0xFFFFFFFF


def sha256_reference(data: bytes) -> str:
    msg = bytearray(data) + b"\x80"
    while len(msg) % 64 != 56:
        msg.append(0)
    msg += struct.pack(">Q", 8 * len(data))
    h = list(_H0)
    for block in range(0, len(msg), 64):
        w = list(struct.unpack(">16I", msg[block:block + 64]))
        for t in range(16, 64):
            s0 = _rotr(w[t - 15], 7) ^ _rotr(w[t - 15], 18) ^ (w[t - 15] >> 3)
            s1 = _rotr(w[t - 2], 17) ^ _rotr(w[t - 2], 19) ^ (w[t - 2] >> 10)
            w.append((w[t - 16] + s0 + w[t - 7] + s1) & 0xFFFFFFFF)
        a, b, c, d, e, f, g, hh = h
        for t in range(64):
            t1 = (hh + (_rotr(e, 6) ^ _rotr(e, 11) ^ _rotr(e, 25)) + ((e & f) ^ (~e & g)) + _K[t] + w[t]) & 0xFFFFFFFF
            t2 = ((_rotr(a, 2) ^ _rotr(a, 13) ^ _rotr(a, 22)) + ((a & b) ^ (a & c) ^ (b & c))) & 0xFFFFFFFF
            a, b, c, d, e, f, g, hh = (t1 + t2) & 0xFFFFFFFF, a, b, c, (d + t1) & 0xFFFFFFFF, e, f, g
        h = [(x + y) & 0xFFFFFFFF for x, y in zip(h, [a, b, c, d, e, f, g, hh])]
    return "".join(f"{x:08x}" for x in h)


# -- brute-force fragment diff ----------------------------------------------
#
# A fragment is identified by the element it was cut from, located by its
# path and its occurrence number among elements with that path.  Its content
# is the element with every cut-out descendant replaced by that locator.  Two
# versions of a document differ in exactly the fragments whose content
# differs (or that are new).

def _blank(s):
    return s is None or not s.strip()


def _locators(doc: ET.Element) -> dict:
    locs, counts = {}, {}
    stack = [(doc, "/" + doc.tag)]
    while stack:
        el, path = stack.pop()
        locs[id(el)] = (path, counts.get(path, 0))
        counts[path] = counts.get(path, 0) + 1
        stack.extend(reversed([(c, f"{path}/{c.tag}") for c in el]))
    return locs


def _content(el, locs, cut_paths):
    kids = []
    for child in el:
        loc = locs[id(child)]
        tail = None if _blank(child.tail) else child.tail
        kids.append((("REF",) + loc if loc[0] in cut_paths else _content(child, locs, cut_paths), tail))
    text = None if _blank(el.text) and len(el) else el.text
    return (el.tag, tuple(el.attrib.items()), text, tuple(kids))


def fragment_contents(doc: ET.Element, cut_paths: set[str]) -> dict:
    """Locator -> own content for the root and every cut-out element."""
    locs = _locators(doc)
    return {
        locs[id(el)]: _content(el, locs, cut_paths)
        for el in doc.iter()
        if el is doc or locs[id(el)][0] in cut_paths
    }


def changed_fragments(before: ET.Element, after: ET.Element, cut_paths: set[str]) -> set:
    a = fragment_contents(before, cut_paths)
    b = fragment_contents(after, cut_paths)
    return {loc for loc, c in b.items() if a.get(loc) != c}


# -- random documents and schemas in the supported subset -------------------

XSD = "http://www.w3.org/2001/XMLSchema"
_ALPHABET = "abcxyz ABC&<>\"'é€中\t"


def _text(rng: random.Random) -> str:
    n = rng.randint(1, 12)
    s = "".join(rng.choice(_ALPHABET) for _ in range(n))
    return s if s.strip() else s + "q"


def random_case(rng: random.Random) -> tuple[bytes, bytes, set[str]]:
    """(document bytes, schema bytes, expected cut paths)."""
    counter = [0]

    def decl(depth):
        counter[0] += 1
        name = f"t{counter[0]}"
        kids = []
        if depth < 4 and (depth == 0 or rng.random() < 0.6):
            kids = [decl(depth + 1) for _ in range(rng.randint(1, 3))]
        return {
            "name": name,
            "kids": kids,
            "ref": depth > 0 and rng.random() < 0.45,
            "reps": 1 if depth == 0 else rng.randint(1, 3),
            "mixed": bool(kids) and rng.random() < 0.1,
            "nested_seq": rng.random() < 0.2,
        }

    root = decl(0)
    schema = ET.Element("xsd:schema", {"xmlns:xsd": XSD})
    top = [root]

    def declare(d, parent):
        el = ET.SubElement(parent, "xsd:element", {"name": d["name"]})
        if not d["kids"]:
            el.set("type", "xsd:string")
            return
        seq = ET.SubElement(ET.SubElement(el, "xsd:complexType"), "xsd:sequence")
        if d["nested_seq"]:
            seq = ET.SubElement(seq, "xsd:sequence")
        for k in d["kids"]:
            if k["ref"]:
                ET.SubElement(seq, "xsd:element", {"ref": k["name"]})
                top.append(k)
            else:
                declare(k, seq)

    i = 0
    while i < len(top):
        declare(top[i], schema)
        i += 1

    cut = set()

    def paths(d, path):
        for k in d["kids"]:
            p = f"{path}/{k['name']}"
            if k["ref"]:
                cut.add(p)
            paths(k, p)

    paths(root, "/" + root["name"])

    def instance(d):
        el = ET.Element(d["name"])
        if rng.random() < 0.3:
            el.set("a", _text(rng))
        if not d["kids"]:
            if rng.random() < 0.9:
                el.text = _text(rng)
            return el
        if d["mixed"]:
            el.text = _text(rng)
        for k in d["kids"]:
            for _ in range(rng.randint(1, k["reps"])):
                child = instance(k)
                if d["mixed"]:
                    child.tail = _text(rng)
                el.append(child)
        return el

    doc = instance(root)
    return ET.tostring(doc, encoding="utf-8"), ET.tostring(schema, encoding="utf-8"), cut


def leaves(doc: ET.Element) -> list[ET.Element]:
    return [el for el in doc.iter() if len(el) == 0]


# -- random record graphs ---------------------------------------------------

def random_graph_spec(rng: random.Random, max_nodes: int = 50) -> dict:
    """JSON-shaped record graph with random sharing and cycles."""
    n = rng.randint(1, max_nodes)
    types = ["Person", "Address", "Town", "Team"]
    nodes = []
    for i in range(n):
        fields = [{"name": "label", "type": "string", "value": f"v{i}-{rng.randint(0, 9)}"}]
        for j in range(rng.randint(0, 3)):
            fields.append({"name": f"r{j}", "type": "ref", "ref": f"n{rng.randrange(n)}"})
        node = {"id": f"n{i}", "type": rng.choice(types), "fields": fields}
        if rng.random() < 0.1:
            node["code"] = "Y29kZQ==" if rng.random() < 0.5 else "b3RoZXI="
        nodes.append(node)
    return {"root": "n0", "nodes": nodes}


def reachable(spec: dict) -> set[str]:
    by_id = {n["id"]: n for n in spec["nodes"]}
    seen, stack = set(), [spec["root"]]
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        stack.extend(f["ref"] for f in by_id[nid]["fields"] if "ref" in f)
    return seen


def code_payloads(spec: dict, ids: set[str]) -> int:
    """Distinct (type, code) pairs among ``ids``; each becomes one code fragment."""
    by_id = {n["id"]: n for n in spec["nodes"]}
    return len({(by_id[i]["type"], by_id[i]["code"]) for i in ids if "code" in by_id[i]})
