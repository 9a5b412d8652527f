#!/usr/bin/env python3
"""Shredding an XML document into named fragments and updating it in place.

The granularity schema decides where the document is cut; every cut becomes
a fragment that is stored once and referenced by name.  Changing one value
later only adds the fragment that actually changed.
"""
import tempfile
from pathlib import Path

from xbase import FilePerBlobStore, Namer
from xbase.bench import fixture
from xbase.codecs import canonical_xml
from xbase.xmlfrag import XmlEntity, get_xml_entity, reify_xml, store_xml_entity, update_xml_entity

doc = fixture("xbasemembers.xml")

for schema in ("xbasemembers-default.xsd", "xbasemembers.xsd"):
    fragments = reify_xml(XmlEntity.parse(doc, fixture(schema)), "192.0.0.1")
    print(f"{schema}: {len(fragments)} fragments")

fragments = reify_xml(XmlEntity.parse(doc, fixture("xbasemembers.xsd")), "192.0.0.1")
print(fragments[2].to_bytes().decode())

store = FilePerBlobStore.create(Path(tempfile.mkdtemp()) / "store")
namer = Namer()
name = store_xml_entity(XmlEntity.parse(doc, fixture("xbasemembers.xsd")), store, namer)
print("stored as", name, "in", len(store.keys()), "blobs")

entity = get_xml_entity(name, store, namer)
entity.document.find("researchFellows/person/age").text = "30"
report = update_xml_entity(entity, store, namer)
print("update added", report.new_fragments, "blob; rebound", report.rebound)

latest = get_xml_entity(name, store, namer)
print(canonical_xml(latest.document).decode())
