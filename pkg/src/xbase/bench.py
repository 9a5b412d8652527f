"""Count-and-size reproductions of the XBaseMembers measurements.

Only fragment counts, byte totals and update decisions are reported; wall
clock numbers depend on the machine and are left out on purpose.
"""
from __future__ import annotations

import copy
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from xbase import codecs
from xbase.namer import Namer
from xbase.root import RuntimeConfig, get_root_namer, get_root_store, reset_roots, stabilise_root
from xbase.stores import FilePerBlobStore, ProxyStore
from xbase.xmlfrag import (
    SOURCE_COMPARE,
    STORE_FEEDBACK,
    STRATEGIES,
    XmlEntity,
    get_xml_entity,
    reify_xml,
    store_xml_entity,
    update_xml_entity,
)


def fixture(name: str) -> bytes:
    return resources.files("xbase").joinpath("data", name).read_bytes()


def members_entity(granularity: bool = True) -> XmlEntity:
    schema = "xbasemembers.xsd" if granularity else "xbasemembers-default.xsd"
    return XmlEntity.parse(fixture("xbasemembers.xml"), fixture(schema))


@dataclass
class SpaceReport:
    fragments: int
    local_store_bytes: int
    root_store_rep_bytes: int
    namer_rep_bytes: int
    file_storage_bytes: int

    @property
    def total_bytes(self) -> int:
        return self.local_store_bytes + self.root_store_rep_bytes + self.namer_rep_bytes


def bench_space(granularity: bool = True, workdir: Optional[Path] = None) -> SpaceReport:
    """Store XBaseMembers through a proxy root with one local store, then stabilise."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        env = RuntimeConfig(home=Path(tmp) / "home", root_store_kind="proxy")
        reset_roots()
        try:
            root: ProxyStore = get_root_store(env)
            local = FilePerBlobStore.create(Path(tmp) / "local", shareable=True)
            root.add_target(local)
            namer = get_root_namer(env)
            entity = members_entity(granularity)
            store_xml_entity(entity, root, namer)
            fragments = len(local.keys())
            fragment_bytes = sum(len(local.get(k)) for k in local.keys())
            namer_rep = codecs.namer_reify(namer)
            stabilise_root(env)
            return SpaceReport(
                fragments=fragments,
                local_store_bytes=fragment_bytes,
                root_store_rep_bytes=(env.home / "root-store.xml").stat().st_size,
                namer_rep_bytes=len(namer_rep),
                file_storage_bytes=len(fixture("xbasemembers.xml")),
            )
        finally:
            reset_roots()


def _staff(doc: ET.Element) -> ET.Element:
    return doc.find("teachingStaff")


def _edit(doc: ET.Element) -> None:
    doc.find("researchFellows/person/age").text = "30"


def _add(doc: ET.Element) -> None:
    person = ET.SubElement(_staff(doc), "person")
    ET.SubElement(person, "name").text = " New Member"
    address = ET.SubElement(person, "address")
    ET.SubElement(address, "town").text = "Crail"


def _delete(doc: ET.Element) -> None:
    staff = _staff(doc)
    staff.remove(staff.findall("person")[-1])


SCENARIOS: dict[str, Callable[[ET.Element], None]] = {
    "noop": lambda doc: None,
    "edit": _edit,
    "add": _add,
    "delete": _delete,
}


@dataclass
class UpdateBench:
    scenario: str
    strategy: str
    changed: list[str] = field(default_factory=list)
    new_blobs: int = 0


def bench_update(scenario: str, strategy: str, workdir: Optional[Path] = None) -> UpdateBench:
    """Store XBaseMembers, read it back, apply ``scenario`` and update with ``strategy``."""
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario is one of {sorted(SCENARIOS)}")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy is one of {STRATEGIES}")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        store = FilePerBlobStore.create(Path(tmp) / "store")
        namer = Namer()
        name = store_xml_entity(members_entity(), store, namer)
        entity = get_xml_entity(name, store, namer)
        SCENARIOS[scenario](entity.document)
        report = update_xml_entity(entity, store, namer, strategy)
        return UpdateBench(scenario, strategy, sorted(report.rebound), report.new_fragments)


def bench_update_table(workdir: Optional[Path] = None) -> list[dict]:
    rows = []
    for scenario in SCENARIOS:
        a = bench_update(scenario, STORE_FEEDBACK, workdir)
        b = bench_update(scenario, SOURCE_COMPARE, workdir)
        rows.append({
            "scenario": scenario,
            "changed": len(a.changed),
            "new_blobs": a.new_blobs,
            "agree": a.changed == b.changed and a.new_blobs == b.new_blobs,
            "fragments": a.changed,
        })
    return rows


def format_space(rows: dict[str, SpaceReport]) -> str:
    cols = list(rows)
    lines = [f"{'XBaseMembers (space)':34}" + "".join(f"{c:>18}" for c in cols)]
    for label, attr in [
        ("Local store (bytes)", "local_store_bytes"),
        ("Root store rep (bytes)", "root_store_rep_bytes"),
        ("Namer rep (bytes)", "namer_rep_bytes"),
        ("Total storage required (bytes)", "total_bytes"),
        ("File storage (bytes)", "file_storage_bytes"),
        ("No of fragments created", "fragments"),
    ]:
        lines.append(f"{label:34}" + "".join(f"{getattr(rows[c], attr):>18}" for c in cols))
    return "\n".join(lines)


def format_updates(rows: list[dict]) -> str:
    lines = [f"{'scenario':10}{'changed':>9}{'new blobs':>11}{'strategies agree':>18}"]
    for r in rows:
        lines.append(f"{r['scenario']:10}{r['changed']:>9}{r['new_blobs']:>11}{str(r['agree']):>18}")
    return "\n".join(lines)
