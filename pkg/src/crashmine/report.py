"""SVG figures and the plain-text data-mining report."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from .deck import SURFACE_KINDS
from .disassemble import PartMesh
from .errors import ReportError
from .metageom import element_sides, side_key

WIDTH, HEIGHT = 480, 360
MARGIN = 56
MARKER = 5.0
# marker shape per class; unknown labels cycle through the same shapes
SHAPES = {"good": "circle", "medium": "square", "poor": "triangle"}
_CYCLE = ("circle", "square", "triangle", "diamond")
_COLORS = {"circle": "#2b8a3e", "square": "#e67700", "triangle": "#c92a2a", "diamond": "#1864ab"}

REPORT_SECTIONS = ("Inputs", "Dedup statistics", "Attribute ranking", "Decision tree",
                   "Class clustering", "Figure index")


def _f(v: float) -> str:
    return f"{v:.2f}"


def _range(values):
    lo, hi = min(values), max(values)
    if hi - lo <= 1e-12 * max(1.0, abs(lo), abs(hi)):
        pad = max(1.0, abs(lo) * 0.1)
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _marker(shape, x, y, r=MARKER):
    color = _COLORS[shape]
    if shape == "circle":
        return f'<circle class="circle" cx="{_f(x)}" cy="{_f(y)}" r="{_f(r)}" fill="{color}"/>'
    if shape == "square":
        return (f'<rect class="square" x="{_f(x - r)}" y="{_f(y - r)}" width="{_f(2 * r)}" '
                f'height="{_f(2 * r)}" fill="{color}"/>')
    if shape == "triangle":
        pts = [(x, y - r * 1.2), (x - r * 1.1, y + r * 0.8), (x + r * 1.1, y + r * 0.8)]
    else:
        pts = [(x, y - r * 1.3), (x + r * 1.3, y), (x, y + r * 1.3), (x - r * 1.3, y)]
    joined = " ".join(f"{_f(a)},{_f(b)}" for a, b in pts)
    return f'<polygon class="{shape}" points="{joined}" fill="{color}"/>'


def shape_for(labels):
    """Marker shape for every distinct label, in a stable order."""
    shapes = {lab: SHAPES[lab] for lab in sorted(set(labels) & set(SHAPES))}
    free = [s for s in _CYCLE if s not in shapes.values()] or list(_CYCLE)
    others = [lab for lab in sorted(set(labels)) if lab not in SHAPES]
    for i, lab in enumerate(others):
        shapes[lab] = free[i % len(free)]
    return shapes


def render_scatter(points, x_name: str, y_name: str, title: str = "") -> str:
    """Scatter plot of ``(x, y, label)`` points as an SVG 1.1 document."""
    points = list(points)
    if not points:
        raise ReportError("scatter needs at least one point")
    for x, y, _ in points:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ReportError(f"non-finite coordinate ({x}, {y})")
    x0, x1 = _range([p[0] for p in points])
    y0, y1 = _range([p[1] for p in points])
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph

    shapes = shape_for([p[2] for p in points])
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
               f'font-size="12">{escape(x_name)}</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {HEIGHT / 2:.1f})">{escape(y_name)}</text>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        out.append(f'<text x="{_f(sx(v))}" y="{HEIGHT - MARGIN + 14}" text-anchor="{anchor}" '
                   f'font-size="10">{v:.4g}</text>')
    for v in (y0, y1):
        out.append(f'<text x="{MARGIN - 4}" y="{_f(sy(v))}" text-anchor="end" '
                   f'font-size="10">{v:.4g}</text>')
    for x, y, label in points:
        out.append(_marker(shapes[label], sx(x), sy(y)))
    ly = MARGIN
    for label in sorted(shapes):
        out.append(_marker(shapes[label], WIDTH - MARGIN + 12, ly, 4))
        out.append(f'<text x="{WIDTH - MARGIN + 20}" y="{ly + 4}" font-size="10">'
                   f'{escape(str(label))}</text>')
        ly += 14
    out.append("</svg>")
    return "\n".join(out) + "\n"


PROJECTIONS = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


def projection_svg(part: PartMesh, plane: str) -> str:
    """Wireframe of the part's surface-element sides projected on one plane."""
    a, b = PROJECTIONS[plane]
    sides = set()
    for el in part.surface_elements():
        for p, q in element_sides(el):
            if p != q:
                sides.add(side_key(p, q))
    if not sides:
        raise ReportError(f"part {part.part_id} has no surface elements to preview")
    used = sorted({n for s in sides for n in s})
    us = [part.nodes[n].xyz[a] for n in used]
    vs = [part.nodes[n].xyz[b] for n in used]
    u0, u1 = _range(us)
    v0, v1 = _range(vs)
    size = 240
    scale = (size - 20) / max(u1 - u0, v1 - v0)

    def pt(n):
        xyz = part.nodes[n].xyz
        return 10 + (xyz[a] - u0) * scale, size - 10 - (xyz[b] - v0) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<title>part {part.part_id} {plane}</title>',
    ]
    for p, q in sorted(sides):
        (x1, y1), (x2, y2) = pt(p), pt(q)
        out.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                   f'stroke="black" stroke-width="0.8"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_part_preview(part: PartMesh, out_dir, digest: str) -> list[Path]:
    """Write the xy/xz/yz previews unless they already exist for this digest."""
    if not any(e.kind in SURFACE_KINDS for e in part.elements.values()):
        raise ReportError(f"part {part.part_id} has no surface elements to preview")
    out_dir = Path(out_dir)
    paths = [out_dir / f"{digest}_{plane}.svg" for plane in PROJECTIONS]
    if all(p.exists() for p in paths):
        return paths
    out_dir.mkdir(parents=True, exist_ok=True)
    for plane, path in zip(PROJECTIONS, paths):
        if not path.exists():
            path.write_text(projection_svg(part, plane), encoding="utf-8")
    return paths


def write_report(root, inputs, dedup, ranking, tree, clustering, figures) -> str:
    """Assemble the report document.

    ``inputs``/``dedup``/``clustering`` are lists of text lines; ``ranking`` is
    an AttributeRanking; ``tree`` a DecisionTree; ``figures`` a list of
    ``(relative path, caption)``. Every figure must exist under ``root``.
    """
    root = Path(root)
    for rel, _ in figures:
        if not (root / rel).is_file():
            raise ReportError(f"figure file missing: {root / rel}")

    out = ["# Inputs", *inputs, ""]
    out += ["# Dedup statistics", *dedup, ""]
    out += ["# Attribute ranking", f"chi-squared, {ranking.bins} equal-frequency bins", ""]
    out += ["| rank | attribute | chi2 |", "|---|---|---|"]
    for i, (name, score) in enumerate(ranking.items, start=1):
        out.append(f"| {i} | {name} | {score:.6g} |")
    out.append("")
    out += ["# Decision tree",
            f"confidence {tree.confidence}, min instances {tree.min_instances}, "
            f"size {tree.size()}, leaves {tree.n_leaves()}, "
            f"pruned subtrees {tree.pruned_subtrees}", "", "```", tree.to_text().rstrip("\n"),
            "```", ""]
    out += ["# Class clustering", *clustering, ""]
    out += ["# Figure index"]
    for rel, caption in figures:
        out.append(f"- {rel}: {caption}")
    return "\n".join(out) + "\n"
