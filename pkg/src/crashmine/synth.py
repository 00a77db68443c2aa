"""Synthetic sheet-metal parts, vehicle decks and crash fleets with planted structure.

Parts are strips: a polyline profile in the x-z plane extruded along y, meshed
with rectangles, optionally with ribs welded onto a profile corner (which
creates branching lines). Fleets vary parts between simulations by thickness,
beading, renumbering or removal, and derive intrusions from planted rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .deck import Element, Node, parse_deck
from .disassemble import PartMesh

STEEL = 7.85e-9  # t/mm^3


@dataclass(frozen=True)
class PartSpec:
    part_id: int
    profile: tuple[tuple[float, float], ...]  # (segment length, direction angle deg)
    width: float
    thickness: float
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    density: float = STEEL
    element_size: float = 25.0
    ribs: tuple[tuple[int, float, float], ...] = ()  # (profile vertex, length, angle deg)
    id_base: int = 0
    id_shift: int = 0

    def beaded(self, segment: int = 0, height: float = 10.0) -> "PartSpec":
        """Press a bead into the middle of one segment (adds surface, keeps the outline)."""
        length, ang = self.profile[segment]
        a = length / 2 - height
        bump = ((a, ang), (height, ang + 90), (2 * height, ang), (height, ang - 90),
                (length - a - 2 * height, ang))
        prof = self.profile[:segment] + bump + self.profile[segment + 1:]
        ribs = tuple((v + 4 if v > segment else v, l, t) for v, l, t in self.ribs)
        return replace(self, profile=prof, ribs=ribs)


def _polyline(profile):
    pts = [np.zeros(2)]
    for length, ang in profile:
        t = math.radians(ang)
        pts.append(pts[-1] + length * np.array([math.cos(t), math.sin(t)]))
    return pts


def _strip_columns(points, lengths_elems):
    cols = [points[0]]
    for (p, q), m in zip(zip(points[:-1], points[1:]), lengths_elems):
        for i in range(1, m + 1):
            cols.append(p + (q - p) * (i / m))
    return cols


def build_part(spec: PartSpec, source_model: str = "synthetic"):
    """Nodes and elements of one part as deck objects."""
    h = spec.element_size
    ny = max(1, round(spec.width / h))
    ys = [spec.width * j / ny for j in range(ny + 1)]
    ox, oy, oz = spec.origin
    base = spec.id_base + spec.id_shift
    nodes, elements = [], []
    counter = {"n": base, "e": base}

    def add_node(u, y, w):
        counter["n"] += 1
        nodes.append(Node(counter["n"], ox + float(u), oy + float(y), oz + float(w)))
        return counter["n"]

    def mesh_strip(cols, first_col_ids=None):
        grid = []
        for ci, c in enumerate(cols):
            if ci == 0 and first_col_ids is not None:
                grid.append(first_col_ids)
            else:
                grid.append([add_node(c[0], y, c[1]) for y in ys])
        for ci in range(len(cols) - 1):
            for j in range(ny):
                counter["e"] += 1
                elements.append(Element(counter["e"], "shell4", spec.part_id, (
                    grid[ci][j], grid[ci + 1][j], grid[ci + 1][j + 1], grid[ci][j + 1])))
        return grid

    pts = _polyline(spec.profile)
    elems = [max(1, round(length / h)) for length, _ in spec.profile]
    cols = _strip_columns(pts, elems)
    grid = mesh_strip(cols)
    vertex_col = np.cumsum([0] + elems)
    for vertex, length, ang in spec.ribs:
        start = pts[vertex]
        t = math.radians(ang)
        end = start + length * np.array([math.cos(t), math.sin(t)])
        m = max(1, round(length / h))
        rib_cols = [start + (end - start) * (i / m) for i in range(m + 1)]
        mesh_strip(rib_cols, first_col_ids=grid[vertex_col[vertex]])
    return nodes, elements


def deck_text(name: str, specs, extra_lines=()) -> str:
    lines = [f"$ synthetic vehicle model {name}", "$ NODE id x y z"]
    node_lines, elem_lines, mat_lines = [], [], []
    for spec in specs:
        nodes, elements = build_part(spec, name)
        node_lines += [f"NODE {n.id} {n.x!r} {n.y!r} {n.z!r}" for n in nodes]
        elem_lines += [f"SHELL {e.id} {e.part_id} " + " ".join(map(str, e.node_ids))
                       for e in elements]
        mat_lines.append(f"MATER {spec.part_id} {spec.thickness!r} {spec.density!r}")
    return "\n".join(lines + node_lines + ["$ SHELL id part n1 n2 n3 n4"] + elem_lines
                     + ["$ MATER part thickness density"] + mat_lines + list(extra_lines)) + "\n"


def part_mesh(spec: PartSpec, source_model: str = "synthetic") -> PartMesh:
    from .disassemble import disassemble

    deck = parse_deck(deck_text(source_model, [spec]), source_model)
    return disassemble(deck)[0]


def transform_part(part: PartMesh, rotation=None, translation=(0.0, 0.0, 0.0)) -> PartMesh:
    r = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    t = np.asarray(translation, dtype=float)
    nodes = {}
    for nid, n in part.nodes.items():
        x, y, z = r @ np.array(n.xyz) + t
        nodes[nid] = Node(nid, float(x), float(y), float(z))
    return replace(part, nodes=nodes)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def refine_quads(part: PartMesh) -> PartMesh:
    """Split every quad into four at its edge midpoints and corner mean."""
    nodes = dict(part.nodes)
    next_id = max(nodes) + 1
    made = {}

    def node_at(key, xyz):
        nonlocal next_id
        if key not in made:
            nodes[next_id] = Node(next_id, *map(float, xyz))
            made[key] = next_id
            next_id += 1
        return made[key]

    elements = {}
    eid = 1
    for el in sorted(part.elements.values(), key=lambda e: e.id):
        if el.kind not in ("shell4", "membrane4"):
            elements[eid] = replace(el, id=eid)
            eid += 1
            continue
        ids = el.node_ids
        p = [np.array(part.nodes[i].xyz) for i in ids]
        mids = [node_at(("m", min(ids[k], ids[(k + 1) % 4]), max(ids[k], ids[(k + 1) % 4])),
                        (p[k] + p[(k + 1) % 4]) / 2) for k in range(4)]
        c = node_at(("c", el.id), sum(p) / 4)
        quads = [(ids[0], mids[0], c, mids[3]), (mids[0], ids[1], mids[1], c),
                 (c, mids[1], ids[2], mids[2]), (mids[3], c, mids[2], ids[3])]
        for q in quads:
            elements[eid] = Element(eid, el.kind, el.part_id, q)
            eid += 1
    return replace(part, nodes=nodes, elements=elements)


def random_part_spec(rng: np.random.Generator, part_id: int = 1) -> PartSpec:
    """A folded strip with 1-4 segments, fold angles in [45, 135] degrees, maybe a rib."""
    n_seg = int(rng.integers(1, 5))
    ang = float(rng.uniform(0, 360))
    profile = []
    for i in range(n_seg):
        if i:
            ang += float(rng.choice([-1, 1]) * rng.uniform(45, 135))
        profile.append((float(rng.integers(2, 6) * 20.0), ang))
    ribs = ()
    if n_seg >= 2 and rng.random() < 0.5:
        ribs = ((1, float(rng.integers(2, 4) * 20.0), profile[0][1] + 180.0 + 90.0),)
    return PartSpec(part_id, tuple(profile), width=float(rng.integers(2, 5) * 20.0),
                    thickness=float(rng.uniform(0.8, 3.0)),
                    origin=tuple(float(v) for v in rng.uniform(-500, 500, 3)),
                    element_size=20.0, ribs=ribs)


# ---------------------------------------------------------------------------
# fleets


@dataclass
class Fleet:
    decks: dict[str, str]  # simulation id -> deck text
    model_names: dict[str, str]
    results_csv: str = ""
    truth: dict = field(default_factory=dict)


def _base_parts(n_parts, rng, first_id=11001, spacing=900.0):
    specs = []
    shapes = [
        ((160.0, 0.0),),
        ((100.0, 0.0), (60.0, 90.0)),
        ((60.0, 0.0), (60.0, 90.0), (80.0, 0.0), (60.0, -90.0), (60.0, 0.0)),
        ((80.0, 0.0), (80.0, 60.0), (80.0, 0.0)),
        ((120.0, 0.0), (40.0, -90.0)),
    ]
    side = math.ceil(n_parts ** (1 / 3))
    for i in range(n_parts):
        gx, gy, gz = i % side, (i // side) % side, i // (side * side)
        prof = shapes[i % len(shapes)]
        scale = 1.0 + 0.15 * (i // len(shapes))
        prof = tuple((l * scale, a) for l, a in prof)
        specs.append(PartSpec(
            part_id=first_id + 10 * i,
            profile=prof,
            width=float(rng.integers(3, 7) * 20.0),
            thickness=round(float(rng.uniform(0.8, 2.5)), 2),
            origin=(gx * spacing, gy * spacing, gz * spacing),
            element_size=20.0,
            id_base=(i + 1) * 100000,
        ))
    return specs


def dedup_fleet(n_sims: int = 10, n_parts: int = 50, n_modified: int = 20, seed: int = 0
                ) -> Fleet:
    """Fleet where exactly ``n_modified`` parts change between simulations.

    ``truth`` holds the modified part ids, the number of distinct part
    instances and the resulting reduction ratio.
    """
    rng = np.random.default_rng(seed)
    base = _base_parts(n_parts, rng)
    modified_idx = sorted(rng.choice(n_parts, size=n_modified, replace=False).tolist())
    variants = {}
    for i in modified_idx:
        s = base[i]
        pool = [s, replace(s, thickness=round(s.thickness * 1.3, 3)), s.beaded(0, 8.0),
                replace(s, id_shift=50000)]
        n_var = int(rng.integers(2, len(pool) + 1))
        variants[i] = pool[:n_var]
    choice = {}
    for i, pool in variants.items():
        picks = rng.integers(0, len(pool), size=n_sims)
        picks[:2] = [0, 1]  # at least two distinct variants in use
        rng.shuffle(picks)
        choice[i] = picks
    decks, names = {}, {}
    used = {i: set() for i in modified_idx}
    for s in range(n_sims):
        sim = f"sim{s + 1:02d}"
        specs = []
        for i, spec in enumerate(base):
            if i in variants:
                k = int(choice[i][s])
                used[i].add(k)
                specs.append(variants[i][k])
            else:
                specs.append(spec)
        names[sim] = f"model_{sim}"
        decks[sim] = deck_text(names[sim], specs)
    total = n_sims * n_parts
    distinct = (n_parts - n_modified) + sum(len(u) for u in used.values())
    return Fleet(decks, names, truth={
        "modified_part_ids": sorted(base[i].part_id for i in modified_idx),
        "distinct": distinct,
        "total": total,
        "reduction_ratio": 1.0 - distinct / total,
    })


EXISTENCE_PART = 11631
THRESHOLD_PART = 13001


def crash_fleet(n_sims: int = 30, seed: int = 7, n_noise_parts: int = 8) -> Fleet:
    """Fleet with planted crash behaviour.

    A support part (11631, two thickness variants) is present in about two
    thirds of the models; without it the crash is poor. With it, a thick floor panel (13001) gives
    good results and a thin one medium. A second noise part varies at random
    and one part is only renumbered. Four intrusions follow the class with
    Gaussian noise.
    """
    rng = np.random.default_rng(seed)
    noise = _base_parts(n_noise_parts, rng)
    support = PartSpec(EXISTENCE_PART, ((80.0, 0.0), (60.0, 90.0)), width=60.0, thickness=1.5,
                       origin=(2700.0, 0.0, 0.0), element_size=20.0, id_base=9100000)
    floor = PartSpec(THRESHOLD_PART, ((200.0, 0.0), (40.0, 90.0)), width=160.0, thickness=1.0,
                     origin=(2700.0, 2700.0, 0.0), element_size=20.0, id_base=9200000)
    rail = PartSpec(12162, ((60.0, 0.0), (50.0, 90.0), (60.0, 0.0)), width=100.0,
                    thickness=1.8, origin=(0.0, 2700.0, 2700.0), element_size=20.0,
                    id_base=9300000)
    floors = [floor, replace(floor, thickness=1.2), replace(floor, thickness=1.6),
              replace(floor, thickness=2.0)]
    rails = [rail, replace(rail, thickness=2.1)]

    decks, names, rows, truth_class = {}, {}, [], {}
    for s in range(n_sims):
        sim = f"sim{s + 1:02d}"
        has_support = (s % 3) != 2
        fi = s % 4 if s < 4 else int(rng.integers(0, 4))
        ri = int(rng.integers(0, 2))
        specs = list(noise)
        if s % 5 == 4:
            specs[0] = replace(specs[0], id_shift=50000)
        if has_support:
            specs.append(support if s % 2 else replace(support, thickness=1.8))
        specs += [floors[fi], rails[ri]]
        if not has_support:
            cls = "poor"
        elif floors[fi].thickness >= 1.6:
            cls = "good"
        else:
            cls = "medium"
        centre = {"good": 20.0, "medium": 45.0, "poor": 80.0}[cls]
        intr = [centre * f + rng.normal(0, 2.0) for f in (1.0, 0.8, 1.2, 0.6)]
        names[sim] = f"model_{sim}"
        decks[sim] = deck_text(names[sim], specs)
        rows.append(sim + "," + ",".join(f"{v:.3f}" for v in intr))
        truth_class[sim] = cls
    csv_text = "simulation_id,intrusion_1,intrusion_2,intrusion_3,intrusion_4\n" + \
        "\n".join(rows) + "\n"
    return Fleet(decks, names, csv_text, truth={"classes": truth_class})


def write_fleet(fleet: Fleet, directory, store="store", output="report") -> Path:
    """Write decks, results and a run config below ``directory``; return the config path.

    Paths inside the config are relative to the directory, so the whole tree
    can be moved.
    """
    root = Path(directory)
    (root / "decks").mkdir(parents=True, exist_ok=True)
    lines = [f"# synthetic fleet, {len(fleet.decks)} simulations"]
    for sim, text in fleet.decks.items():
        (root / "decks" / f"{sim}.deck").write_text(text, encoding="utf-8")
        lines.append(f"deck.{sim} = decks/{sim}.deck")
    if fleet.results_csv:
        (root / "results.csv").write_text(fleet.results_csv, encoding="utf-8")
        lines.append("results = results.csv")
    lines += [f"store = {store}", f"output = {output}"]
    cfg = root / "run.cfg"
    cfg.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return cfg
