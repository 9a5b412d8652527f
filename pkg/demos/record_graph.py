#!/usr/bin/env python3
"""Persisting a small object graph as XML fragments.

A person refers to an address; a second person shares that address.  Each
object becomes one fragment, and the shared address comes back as one
object referenced twice.
"""
import tempfile
from pathlib import Path

from xbase import FilePerBlobStore, Namer
from xbase.recordcast import Field, RecordGraph, RecordNode, Ref, get_graph, reify_graph, store_graph

graph = RecordGraph.of([
    RecordNode("vangelis", "Person", [
        Field("name", "java.lang.String", "Ada"),
        Field("address", "Address", Ref("home")),
        Field("colleague", "Person", Ref("graham")),
    ]),
    RecordNode("graham", "Person", [
        Field("name", "java.lang.String", "Alan"),
        Field("address", "Address", Ref("home")),
        Field("colleague", "Person", Ref("vangelis")),
    ]),
    RecordNode("home", "Address", [Field("address", "java.lang.String", "St Andrews")]),
], root="vangelis")

for fragment in reify_graph(graph, "192.0.0.1"):
    print(fragment.to_bytes().decode())

store = FilePerBlobStore.create(Path(tempfile.mkdtemp()) / "store")
namer = Namer()
name, report = store_graph(graph, store, namer)
back = get_graph(name, store, namer)
first, second = back.nodes[name], back.nodes[back.nodes[name].fields[2].value.node]
print("shared address kept:", first.fields[1].value == second.fields[1].value)
print("cycle kept:", second.fields[2].value.node == name)
