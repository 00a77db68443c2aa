"""Mesh-independent geometric descriptors of one part.

Surface elements are lumped into point masses at their corner mean; the part's
mass, centre of gravity and inertia tensor follow from the point-mass system.
Element sides are classified by how many elements share them: one (margin),
two (interior or feature edge, depending on the angle between the normals) or
three and more (branching line).
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from .deck import SURFACE_KINDS, Element
from .disassemble import PartMesh, checksum
from .errors import DegenerateElementError, MetadataError

log = logging.getLogger(__name__)

DEFAULT_ANGLE_THRESHOLD = 20.0

INTERIOR = "interior"
FEATURE_EDGE = "feature_edge"
MARGIN = "margin"
BRANCHING = "branching"


def _corners(element: Element, nodes) -> np.ndarray:
    if element.kind not in SURFACE_KINDS:
        raise MetadataError(f"element {element.id}: no surface for kind {element.kind}")
    return np.array([nodes[n].xyz for n in element.node_ids], dtype=float)


def _cross(u, v) -> np.ndarray:
    # np.cross carries a lot of overhead for single 3-vectors
    return np.array([u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2],
                     u[0] * v[1] - u[1] * v[0]])


def _norm(v) -> float:
    return math.sqrt(float(v @ v))


def _area_vector(p: np.ndarray) -> np.ndarray:
    # twice the vector area: diagonal cross product for quads, edge cross product for triangles
    if len(p) == 4:
        return _cross(p[2] - p[0], p[3] - p[1])
    return _cross(p[1] - p[0], p[2] - p[0])


def element_area(element: Element, nodes) -> float:
    """Area of a shell or membrane element in mm².

    Quads use half the norm of the diagonal cross product, which is exact
    for planar quads and well defined for warped ones.
    """
    return 0.5 * _norm(_area_vector(_corners(element, nodes)))


def element_normal(element: Element, nodes) -> np.ndarray:
    """Unit normal by the right-hand rule on the node ordering."""
    p = _corners(element, nodes)
    if len(p) == 4:
        u, v = p[2] - p[0], p[3] - p[1]
    else:
        u, v = p[1] - p[0], p[2] - p[0]
    lu, lv = _norm(u), _norm(v)
    if lu == 0.0 or lv == 0.0:
        raise DegenerateElementError(element.id, "zero-length diagonal or edge")
    n = _cross(u / lu, v / lv)
    ln = _norm(n)
    if ln <= 1e-12:
        raise DegenerateElementError(element.id, "diagonals are parallel")
    return n / ln


def dihedral_angle(n1, n2) -> float:
    """Angle in degrees between two unit normals, ``2 asin(|n2 - n1| / 2)``."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    for n in (n1, n2):
        if abs(_norm(n) - 1.0) > 1e-6:
            raise ValueError(f"normal {n.tolist()} is not unit length")
    chord = min(_norm(n2 - n1) / 2.0, 1.0)
    return math.degrees(2.0 * math.asin(chord))


def element_sides(element: Element) -> list[tuple[int, int]]:
    """Directed sides in node-loop order."""
    ids = element.node_ids
    return [(ids[i], ids[(i + 1) % len(ids)]) for i in range(len(ids))]


def side_key(a: int, b: int) -> tuple[int, int]:
    if a == b:
        raise ValueError(f"side with identical end nodes {a}")
    return (a, b) if a < b else (b, a)


@dataclass
class SideClassification:
    kinds: dict[tuple[int, int], str]
    incidence: dict[tuple[int, int], int]

    def sides_of(self, kind):
        return sorted(k for k, v in self.kinds.items() if v == kind)


def classify_sides(part: PartMesh, angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD
                   ) -> SideClassification:
    """Classify every side of the part's surface elements.

    Two elements sharing a side are compared with orientation taken into
    account: when both traverse the shared side in the same direction their
    loops are inconsistently ordered and one normal is flipped first.
    """
    if not 0.0 < angle_threshold_deg < 180.0:
        raise ValueError("angle threshold must lie in (0, 180)")
    users = defaultdict(list)
    for el in part.surface_elements():
        for a, b in element_sides(el):
            if a == b:
                continue
            users[side_key(a, b)].append((el, a < b))

    normals = {}

    def normal(el):
        if el.id not in normals:
            try:
                normals[el.id] = element_normal(el, part.nodes)
            except DegenerateElementError:
                normals[el.id] = None
        return normals[el.id]

    kinds, incidence = {}, {}
    for key in sorted(users):
        inc = users[key]
        incidence[key] = len(inc)
        if len(inc) == 1:
            kinds[key] = MARGIN
        elif len(inc) >= 3:
            kinds[key] = BRANCHING
        else:
            (e1, fwd1), (e2, fwd2) = inc
            n1, n2 = normal(e1), normal(e2)
            if n1 is None or n2 is None:
                kinds[key] = INTERIOR
                continue
            if fwd1 == fwd2:
                n2 = -n2
            angle = dihedral_angle(n1, n2)
            kinds[key] = FEATURE_EDGE if angle > angle_threshold_deg else INTERIOR
    return SideClassification(kinds, incidence)


@dataclass(frozen=True)
class PartMetadata:
    part_id: int
    source_model: str
    digest: str
    surface: float
    mass: float
    cog: tuple[float, float, float]
    inertia: tuple[float, float, float, float, float, float]
    principal: tuple[float, float, float]
    edge_length: float
    margin_length: float
    branching_length: float
    bbox: tuple[float, float, float]
    n_elements: int = 0
    n_excluded: int = 0

    def to_dict(self):
        d = asdict(self)
        for k in ("cog", "inertia", "principal", "bbox"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("cog", "inertia", "principal", "bbox"):
            d[k] = tuple(float(v) for v in d[k])
        return cls(**d)

    def features(self) -> dict[str, float]:
        """Flat named feature vector used for clustering and similarity."""
        return {
            "mass": self.mass,
            "surface": self.surface,
            "cog_x": self.cog[0],
            "cog_y": self.cog[1],
            "cog_z": self.cog[2],
            "i1": self.principal[0],
            "i2": self.principal[1],
            "i3": self.principal[2],
            "edge_length": self.edge_length,
            "margin_length": self.margin_length,
            "branching_length": self.branching_length,
            "bbox_dx": self.bbox[0],
            "bbox_dy": self.bbox[1],
            "bbox_dz": self.bbox[2],
        }


FEATURES = ("mass", "surface", "cog_x", "cog_y", "cog_z", "i1", "i2", "i3",
            "edge_length", "margin_length", "branching_length", "bbox_dx", "bbox_dy", "bbox_dz")


def point_mass_inertia(masses, points, centre) -> np.ndarray:
    """3x3 inertia tensor of point masses about ``centre`` (global axes)."""
    r = np.asarray(points, dtype=float) - np.asarray(centre, dtype=float)
    m = np.asarray(masses, dtype=float)
    r2 = np.einsum("ij,ij->i", r, r)
    return np.eye(3) * np.dot(m, r2) - np.einsum("i,ij,ik->jk", m, r, r)


def compute_metadata(part: PartMesh, angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD
                     ) -> PartMetadata:
    """Meta data of one part.

    ``inertia`` holds the tensor entries (Ixx, Iyy, Izz, Ixy, Ixz, Iyz) about the
    centre of gravity, off-diagonals with the usual negative sign so the tensor
    is positive semidefinite; ``principal`` are its eigenvalues in ascending
    order. Solids, beams and bars are skipped with a logged warning.
    """
    surf = part.surface_elements()
    excluded = len(part.elements) - len(surf)
    if excluded:
        log.warning("part %d of %s: %d solid/beam/bar element(s) excluded from meta data",
                    part.part_id, part.source_model, excluded)
    if not surf:
        raise MetadataError(f"part {part.part_id} has no shell or membrane elements")
    if part.material is None:
        raise MetadataError(f"part {part.part_id} has no material")

    areas = np.empty(len(surf))
    centroids = np.empty((len(surf), 3))
    for i, el in enumerate(surf):
        p = _corners(el, part.nodes)
        areas[i] = 0.5 * _norm(_area_vector(p))
        centroids[i] = p.mean(axis=0)

    masses = areas * (part.material.thickness * part.material.density)
    mass = float(masses.sum())
    if not mass > 0.0:
        raise MetadataError(f"part {part.part_id} has zero total mass")
    cog = masses @ centroids / mass
    tensor = point_mass_inertia(masses, centroids, cog)
    tensor = 0.5 * (tensor + tensor.T)
    principal = np.linalg.eigvalsh(tensor)

    sides = classify_sides(part, angle_threshold_deg)
    lengths = defaultdict(float)
    for (a, b), kind in sides.kinds.items():
        pa, pb = part.nodes[a].xyz, part.nodes[b].xyz
        lengths[kind] += math.dist(pa, pb)

    xyz = np.array([n.xyz for n in part.nodes.values()])
    extent = xyz.max(axis=0) - xyz.min(axis=0)

    return PartMetadata(
        part_id=part.part_id,
        source_model=part.source_model,
        digest=checksum(part),
        surface=float(areas.sum()),
        mass=mass,
        cog=tuple(float(c) for c in cog),
        inertia=(float(tensor[0, 0]), float(tensor[1, 1]), float(tensor[2, 2]),
                 float(tensor[0, 1]), float(tensor[0, 2]), float(tensor[1, 2])),
        principal=tuple(float(v) for v in principal),
        edge_length=lengths[FEATURE_EDGE],
        margin_length=lengths[MARGIN],
        branching_length=lengths[BRANCHING],
        bbox=tuple(float(v) for v in extent),
        n_elements=len(surf),
        n_excluded=excluded,
    )
