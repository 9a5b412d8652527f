import json
import random

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from xbase.codecs import parse_xml
from xbase.errors import ReflectError, ReifyError
from xbase.namer import Namer
from xbase.recordcast import (
    Field,
    RecordGraph,
    RecordNode,
    Ref,
    get_graph,
    isomorphic,
    reflect_graph,
    reify_graph,
    store_graph,
)
from xbase.stores import FilePerBlobStore
from xbase.xmlfrag import MappingResolver


def person_address() -> RecordGraph:
    return RecordGraph.of([
        RecordNode("p", "Person", [
            Field("name", "java.lang.String", "Ada"),
            Field("address", "Address", Ref("a")),
        ]),
        RecordNode("a", "Address", [Field("address", "java.lang.String", "St Andrews")]),
    ], root="p")


def test_person_address_fragments():
    frags = reify_graph(person_address(), "192.0.0.1")
    assert [f.name for f in frags] == ["192.0.0.1-person-1", "192.0.0.1-address-1"]
    person = frags[0].to_bytes()
    assert b"<value>Ada</value>" in person
    assert b'<XBaseRef ref="192.0.0.1-address-1"/>' in person
    el = parse_xml(person)
    assert el.tag == "XBaseName" and el.get("ref") == "192.0.0.1-person-1"
    f1, f2 = el.find("fields")
    assert (f1.tag, f1.findtext("name"), f1.findtext("type")) == ("field1", "name", "java.lang.String")
    assert (f2.tag, f2.findtext("name"), f2.findtext("type")) == ("field2", "address", "Address")
    assert b"<value>St Andrews</value>" in frags[1].to_bytes()


def test_person_address_round_trip():
    g = person_address()
    frags = reify_graph(g, "192.0.0.1")
    back = reflect_graph([f.to_bytes() for f in frags], root="192.0.0.1-person-1")
    assert isomorphic(g, back)
    assert back.nodes["192.0.0.1-person-1"].fields[0].value == "Ada"


def test_code_payload_gets_its_own_fragment():
    g = person_address()
    g.nodes["p"].code = b"\xca\xfe\xba\xbe"
    frags = reify_graph(g, "192.0.0.1")
    assert [f.kind for f in frags] == ["object", "object", "code"]
    assert frags[2].name == "192.0.0.1-class_person-1"
    assert b"<code>192.0.0.1-class_person-1</code>" in frags[0].to_bytes()
    code = parse_xml(frags[2].to_bytes()).find("code")
    assert code.findtext("className") == "Person" and code.findtext("bytes") == "yv66vg=="
    back = reflect_graph([f.to_bytes() for f in frags], root="192.0.0.1-person-1")
    assert back.nodes["192.0.0.1-person-1"].code == b"\xca\xfe\xba\xbe"


def test_cycle_gives_two_fragments():
    g = RecordGraph.of([
        RecordNode("a", "Node", [Field("next", "Node", Ref("b"))]),
        RecordNode("b", "Node", [Field("next", "Node", Ref("a"))]),
    ], root="a")
    frags = reify_graph(g)
    assert len(frags) == 2
    back = reflect_graph([f.to_bytes() for f in frags], root=frags[0].name)
    assert isomorphic(g, back)


def test_diamond_emits_shared_node_once():
    g = RecordGraph.of([
        RecordNode("r", "Top", [Field("x", "Mid", Ref("x")), Field("y", "Mid", Ref("y"))]),
        RecordNode("x", "Mid", [Field("z", "Leaf", Ref("z"))]),
        RecordNode("y", "Mid", [Field("z", "Leaf", Ref("z"))]),
        RecordNode("z", "Leaf", [Field("v", "int", "1")]),
    ], root="r")
    frags = reify_graph(g)
    assert len(frags) == 4
    back = reflect_graph([f.to_bytes() for f in frags], root=frags[0].name)
    assert isomorphic(g, back)
    x, y = (back.nodes[f.value.node] for f in back.nodes[back.root].fields)
    assert x.fields[0].value.node == y.fields[0].value.node


def test_isomorphism_sees_broken_aliasing():
    shared = RecordGraph.of([
        RecordNode("r", "T", [Field("a", "L", Ref("z")), Field("b", "L", Ref("z"))]),
        RecordNode("z", "L", []),
    ], root="r")
    split = RecordGraph.of([
        RecordNode("r", "T", [Field("a", "L", Ref("z1")), Field("b", "L", Ref("z2"))]),
        RecordNode("z1", "L", []),
        RecordNode("z2", "L", []),
    ], root="r")
    assert not isomorphic(shared, split)


def test_missing_fragment_and_missing_root():
    frags = reify_graph(person_address())
    with pytest.raises(ReflectError):
        reflect_graph([frags[0].to_bytes()], MappingResolver(), root=frags[0].name)
    with pytest.raises(ReifyError):
        reify_graph(RecordGraph({}, None))
    with pytest.raises(ReifyError):
        reify_graph(RecordGraph.of([RecordNode("a", "T", [Field("f", "T", Ref("ghost"))])], root="a"))


def test_json_form_round_trips():
    g = person_address()
    assert isomorphic(g, RecordGraph.from_json(g.to_json()))


def test_store_get_and_update_one_field(tmp_path):
    store, namer = FilePerBlobStore.create(tmp_path / "s"), Namer()
    g = person_address()
    name, report = store_graph(g, store, namer)
    assert report.new_fragments == 2
    got = get_graph(name, store, namer)
    assert isomorphic(g, got)

    got.nodes[got.root].fields[0] = Field("name", "java.lang.String", "Grace")
    _, report = store_graph(got, store, namer)
    assert report.new_fragments == 1 and report.rebound == [name]
    assert get_graph(name, store, namer).nodes[name].fields[0].value == "Grace"


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_random_graphs(seed):
    spec = oracles.random_graph_spec(random.Random(seed))
    g = RecordGraph.from_json(json.dumps(spec))
    frags = reify_graph(g)
    live = oracles.reachable(spec)
    assert len(frags) == len(live) + oracles.code_payloads(spec, live)
    back = reflect_graph([f.to_bytes() for f in frags], root=frags[0].name)
    assert isomorphic(g, back)
