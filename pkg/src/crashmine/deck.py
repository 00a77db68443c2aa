"""Reading and checking whole-vehicle input decks.

The deck is a line-oriented keyword format::

    $ comment
    NODE  <id> <x> <y> <z>
    SHELL <id> <part> <n1> <n2> <n3> [<n4>]
    MEMBR <id> <part> <n1> <n2> <n3> <n4>
    SOLID <id> <part> <n1> ... <n8>
    BEAM  <id> <part> <n1> <n2>
    BAR   <id> <part> <n1> <n2> <n3>
    MATER <part> <thickness> <density>

A SHELL whose fourth node is 0 (or repeats the third) is a triangle.
"""

from __future__ import annotations

import io
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, TextIO

from .errors import DeckIntegrityError, DeckParseError

log = logging.getLogger(__name__)

MAX_LINE_LENGTH = 4096

#: node count per element kind
ARITY = {
    "shell3": 3,
    "shell4": 4,
    "membrane4": 4,
    "solid8": 8,
    "beam2": 2,
    "bar3": 3,
}
SURFACE_KINDS = frozenset({"shell3", "shell4", "membrane4"})

_KEYWORD_KIND = {
    "MEMBR": "membrane4",
    "SOLID": "solid8",
    "BEAM": "beam2",
    "BAR": "bar3",
}
_KIND_KEYWORD = {v: k for k, v in _KEYWORD_KIND.items()}
_KIND_KEYWORD["shell3"] = "SHELL"
_KIND_KEYWORD["shell4"] = "SHELL"

_INT_RE = re.compile(r"[+-]?\d+\Z")
_REAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")
_TOKEN_RE = re.compile(r"\S+")

_SEVERITY_RANK = {"error": 0, "warning": 1}


@dataclass(frozen=True, slots=True)
class Node:
    id: int
    x: float
    y: float
    z: float

    @property
    def xyz(self):
        return (self.x, self.y, self.z)


@dataclass(frozen=True, slots=True)
class Element:
    id: int
    kind: str
    part_id: int
    node_ids: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class Material:
    part_id: int
    thickness: float
    density: float


@dataclass(frozen=True, slots=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    location: tuple[str, int]
    column: int | None = None

    def sort_key(self):
        return (_SEVERITY_RANK.get(self.severity, 9), self.location, self.code)

    def __str__(self):
        where = f"{self.location[0]} {self.location[1]}"
        if self.column is not None:
            where += f", col {self.column}"
        return f"{self.severity} {self.code} at {where}: {self.message}"


@dataclass(frozen=True)
class InputDeck:
    """A parsed vehicle model. Treat as immutable once built."""

    name: str
    nodes: dict[int, Node]
    elements: dict[int, Element]
    materials: dict[int, Material]
    warnings: tuple[Diagnostic, ...] = field(default=(), compare=False, repr=False)

    def part_ids(self):
        return sorted({e.part_id for e in self.elements.values()})


def _columns(line):
    return [(m.group(), m.start() + 1) for m in _TOKEN_RE.finditer(line)]


def parse_deck(source: str | TextIO | Iterable[str], name: str = "deck") -> InputDeck:
    """Parse deck text into an :class:`InputDeck`.

    ``source`` may be a string, a text stream or any iterable of lines.
    Syntax problems and integrity problems are collected over the whole input;
    the first family found raises :class:`DeckParseError`, otherwise duplicates
    and dangling node references raise :class:`DeckIntegrityError`. Unknown
    keywords only produce warnings, stored on ``deck.warnings``.
    """
    if isinstance(source, str):
        source = io.StringIO(source)

    nodes: dict[int, Node] = {}
    elements: dict[int, Element] = {}
    materials: dict[int, Material] = {}
    errors: list[Diagnostic] = []
    integrity: list[Diagnostic] = []
    warnings: list[Diagnostic] = []
    unknown = 0
    element_lines: dict[int, int] = {}

    def err(code, msg, lineno, col=None):
        errors.append(Diagnostic("error", code, msg, ("line", lineno), col))

    def to_int(tok, col, lineno, what):
        if not _INT_RE.match(tok):
            err("BAD_INTEGER", f"malformed {what} {tok!r}", lineno, col)
            return None
        return int(tok)

    def to_real(tok, col, lineno, what):
        if not _REAL_RE.match(tok):
            err("BAD_REAL", f"malformed {what} {tok!r}", lineno, col)
            return None
        value = float(tok)
        if not math.isfinite(value):
            err("BAD_REAL", f"non-finite {what} {tok!r}", lineno, col)
            return None
        return value

    lineno = 0
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if len(line.encode("utf-8")) > MAX_LINE_LENGTH:
            err("LINE_TOO_LONG", f"line exceeds {MAX_LINE_LENGTH} bytes", lineno)
            continue
        stripped = line.lstrip()
        if not stripped or stripped[0] in "$#":
            continue
        toks = _columns(line)
        keyword = toks[0][0].upper()
        fields = toks[1:]

        if keyword == "NODE":
            if len(fields) != 4:
                err("FIELD_COUNT", f"NODE needs 4 fields, got {len(fields)}", lineno)
                continue
            nid = to_int(*fields[0], lineno, "node id")
            coords = [to_real(*f, lineno, "coordinate") for f in fields[1:]]
            if nid is None or None in coords:
                continue
            if nid <= 0:
                err("BAD_ID", f"node id must be positive, got {nid}", lineno, fields[0][1])
                continue
            if nid in nodes:
                integrity.append(Diagnostic(
                    "error", "DUPLICATE_NODE", f"node {nid} defined twice", ("line", lineno)))
                continue
            nodes[nid] = Node(nid, *coords)

        elif keyword == "MATER":
            if len(fields) != 3:
                err("FIELD_COUNT", f"MATER needs 3 fields, got {len(fields)}", lineno)
                continue
            pid = to_int(*fields[0], lineno, "part id")
            d = to_real(*fields[1], lineno, "thickness")
            rho = to_real(*fields[2], lineno, "density")
            if pid is None or d is None or rho is None:
                continue
            if pid <= 0:
                err("BAD_ID", f"part id must be positive, got {pid}", lineno, fields[0][1])
                continue
            if d <= 0 or rho <= 0:
                err("BAD_MATERIAL", "thickness and density must be positive", lineno)
                continue
            if pid in materials:
                integrity.append(Diagnostic(
                    "error", "DUPLICATE_MATERIAL", f"part {pid} has two MATER records",
                    ("line", lineno)))
                continue
            materials[pid] = Material(pid, d, rho)

        elif keyword == "SHELL" or keyword in _KEYWORD_KIND:
            if keyword == "SHELL":
                if len(fields) not in (5, 6):
                    err("FIELD_COUNT", f"SHELL needs 5 or 6 fields, got {len(fields)}", lineno)
                    continue
            else:
                want = ARITY[_KEYWORD_KIND[keyword]] + 2
                if len(fields) != want:
                    err("FIELD_COUNT", f"{keyword} needs {want} fields, got {len(fields)}", lineno)
                    continue
            ints = [to_int(*f, lineno, "id") for f in fields]
            if None in ints:
                continue
            eid, pid, *nids = ints
            if eid <= 0 or pid <= 0:
                err("BAD_ID", "element and part ids must be positive", lineno)
                continue
            if keyword == "SHELL":
                if len(nids) == 4 and (nids[3] == 0 or nids[3] == nids[2]):
                    nids = nids[:3]
                kind = "shell3" if len(nids) == 3 else "shell4"
            else:
                kind = _KEYWORD_KIND[keyword]
            if any(n <= 0 for n in nids):
                err("BAD_ID", "node ids must be positive", lineno)
                continue
            if eid in elements:
                integrity.append(Diagnostic(
                    "error", "DUPLICATE_ELEMENT", f"element {eid} defined twice", ("line", lineno)))
                continue
            elements[eid] = Element(eid, kind, pid, tuple(nids))
            element_lines[eid] = lineno

        else:
            unknown += 1
            warnings.append(Diagnostic(
                "warning", "UNKNOWN_KEYWORD", f"skipped record {toks[0][0]!r}", ("line", lineno), 1))

    if errors:
        raise DeckParseError(f"{name}: {len(errors)} syntax error(s)", errors)

    for eid, el in elements.items():
        missing = [n for n in el.node_ids if n not in nodes]
        if missing:
            integrity.append(Diagnostic(
                "error", "DANGLING_NODE",
                f"element {eid} references missing node(s) {', '.join(map(str, missing))}",
                ("line", element_lines[eid])))
    if integrity:
        integrity.sort(key=Diagnostic.sort_key)
        raise DeckIntegrityError(f"{name}: {len(integrity)} integrity error(s)", integrity)

    if lineno == 0 or not (nodes or elements or materials):
        warnings.append(Diagnostic("warning", "EMPTY_DECK", "empty deck", ("line", lineno)))
    if unknown:
        log.warning("%s: skipped %d record(s) with unknown keywords", name, unknown)

    return InputDeck(name, nodes, elements, materials, tuple(warnings))


def read_deck(path, name=None) -> InputDeck:
    from pathlib import Path

    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return parse_deck(fh, name or path.stem)


def validate_deck(deck: InputDeck) -> list[Diagnostic]:
    """Check every deck invariant; never raises.

    Returns an empty list for a consistent deck, otherwise diagnostics sorted
    by severity and location.
    """
    report = []

    def add(code, msg, where, ident, severity="error"):
        report.append(Diagnostic(severity, code, msg, (where, ident)))

    for nid, node in deck.nodes.items():
        if nid != node.id or nid <= 0:
            add("BAD_NODE_ID", f"node keyed {nid} has id {node.id}", "node", nid)
        if not all(math.isfinite(c) for c in node.xyz):
            add("NONFINITE_COORD", f"node {nid} has non-finite coordinates", "node", nid)

    surface_parts = set()
    for eid, el in deck.elements.items():
        if eid != el.id or eid <= 0:
            add("BAD_ELEMENT_ID", f"element keyed {eid} has id {el.id}", "element", eid)
        if el.kind not in ARITY:
            add("UNKNOWN_KIND", f"element {eid} has unknown kind {el.kind!r}", "element", eid)
        elif len(el.node_ids) != ARITY[el.kind]:
            add("BAD_ARITY", f"element {eid} ({el.kind}) has {len(el.node_ids)} nodes",
                "element", eid)
        if el.part_id <= 0:
            add("BAD_PART_ID", f"element {eid} has part id {el.part_id}", "element", eid)
        missing = [n for n in el.node_ids if n not in deck.nodes]
        if missing:
            add("DANGLING_NODE",
                f"element {eid} references missing node(s) {', '.join(map(str, missing))}",
                "element", eid)
        if len(set(el.node_ids)) != len(el.node_ids):
            add("DEGENERATE_ELEMENT", f"element {eid} repeats a node id", "element", eid)
        if el.kind in SURFACE_KINDS:
            surface_parts.add(el.part_id)

    for pid, mat in deck.materials.items():
        if pid != mat.part_id:
            add("BAD_MATERIAL_KEY", f"material keyed {pid} belongs to part {mat.part_id}",
                "part", pid)
        if not (math.isfinite(mat.thickness) and math.isfinite(mat.density)
                and mat.thickness > 0 and mat.density > 0):
            add("BAD_MATERIAL", f"part {pid} has non-positive thickness or density", "part", pid)

    for pid in sorted(surface_parts - set(deck.materials)):
        add("MISSING_MATERIAL", f"part {pid} has surface elements but no material", "part", pid)

    report.sort(key=Diagnostic.sort_key)
    return report


def _fmt(value: float) -> str:
    return repr(float(value))


def format_deck(deck: InputDeck) -> str:
    """Render a deck back to text; ``parse_deck(format_deck(d)) == d``."""
    out = [f"$ deck {deck.name}"]
    for nid in sorted(deck.nodes):
        n = deck.nodes[nid]
        out.append(f"NODE {nid} {_fmt(n.x)} {_fmt(n.y)} {_fmt(n.z)}")
    for eid in sorted(deck.elements):
        el = deck.elements[eid]
        nids = list(el.node_ids)
        if el.kind == "shell3":
            nids.append(0)
        out.append(" ".join([_KIND_KEYWORD[el.kind], str(eid), str(el.part_id), *map(str, nids)]))
    for pid in sorted(deck.materials):
        m = deck.materials[pid]
        out.append(f"MATER {pid} {_fmt(m.thickness)} {_fmt(m.density)}")
    return "\n".join(out) + "\n"
