"""Splitting a deck into per-part sub-meshes and fingerprinting them."""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass

from .deck import SURFACE_KINDS, Element, InputDeck, Material, Node
from .errors import MissingMaterialError


@dataclass(frozen=True)
class PartMesh:
    part_id: int
    source_model: str
    nodes: dict[int, Node]
    elements: dict[int, Element]
    material: Material | None

    def surface_elements(self):
        return [self.elements[e] for e in sorted(self.elements)
                if self.elements[e].kind in SURFACE_KINDS]


def disassemble(deck: InputDeck) -> list[PartMesh]:
    """One :class:`PartMesh` per part id, sorted by part id.

    Nodes shared between parts are copied into each part that uses them.
    Parts made only of solids, beams or bars may lack a material.
    """
    by_part = defaultdict(list)
    for el in deck.elements.values():
        by_part[el.part_id].append(el)

    parts = []
    for pid in sorted(by_part):
        els = sorted(by_part[pid], key=lambda e: e.id)
        material = deck.materials.get(pid)
        if material is None and any(e.kind in SURFACE_KINDS for e in els):
            raise MissingMaterialError(pid)
        used = sorted({n for e in els for n in e.node_ids})
        parts.append(PartMesh(
            part_id=pid,
            source_model=deck.name,
            nodes={n: deck.nodes[n] for n in used},
            elements={e.id: e for e in els},
            material=material,
        ))
    return parts


def render_number(value: float) -> str:
    """Shortest decimal with at most 9 significant digits that reproduces
    ``value`` rounded to 9 significant digits. ``-0`` renders as ``0``."""
    value = float(value)
    if value == 0.0:
        return "0"
    target = float(f"{value:.9g}")
    for digits in range(1, 10):
        text = f"{value:.{digits}g}"
        if float(text) == target:
            return text
    return f"{value:.9g}"


def canonicalize(part: PartMesh) -> bytes:
    lines = [f"PART {part.part_id}"]
    if part.material is not None:
        lines.append(f"MATER {render_number(part.material.thickness)} "
                     f"{render_number(part.material.density)}")
    for nid in sorted(part.nodes):
        n = part.nodes[nid]
        lines.append(f"N {nid} {render_number(n.x)} {render_number(n.y)} {render_number(n.z)}")
    for eid in sorted(part.elements):
        el = part.elements[eid]
        lines.append(" ".join(["E", el.kind, str(eid), *map(str, el.node_ids)]))
    return ("\n".join(lines) + "\n").encode("ascii")


def md5_hex(data: bytes) -> str:
    return hashlib.md5(data).hexdigest()


def checksum(part: PartMesh) -> str:
    """MD5 of the canonical bytes, lowercase hex."""
    return md5_hex(canonicalize(part))


def parse_canonical(data: bytes | str, source_model: str = "") -> PartMesh:
    """Read back a canonical ``.mesh`` file (as written by the part store)."""
    if isinstance(data, bytes):
        data = data.decode("ascii")
    part_id = None
    material = None
    nodes, elements = {}, {}
    for line in data.splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "PART":
            part_id = int(tok[1])
        elif tok[0] == "MATER":
            material = Material(part_id, float(tok[1]), float(tok[2]))
        elif tok[0] == "N":
            nid = int(tok[1])
            nodes[nid] = Node(nid, float(tok[2]), float(tok[3]), float(tok[4]))
        elif tok[0] == "E":
            eid = int(tok[2])
            elements[eid] = Element(eid, tok[1], part_id, tuple(int(t) for t in tok[3:]))
    return PartMesh(part_id, source_model, nodes, elements, material)
