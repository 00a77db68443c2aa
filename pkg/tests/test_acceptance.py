"""Acceptance criteria 1-9, one test each.

Every test carries a ``criterion`` mark; the conftest prints one PASS/FAIL
line per criterion at the end of the run.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from crashmine.deck import Element
from crashmine.metageom import compute_metadata, dihedral_angle, element_area, element_normal
from crashmine.mining.arff import write_arff
from crashmine.mining.chi2 import chi_squared_rank, discretize
from crashmine.mining.kmeans import kmeans_classes
from crashmine.mining.table import MiningTable, assemble_table, parse_results_csv
from crashmine.mining.tree import DecisionTree, build_tree
from crashmine.partstore import PartStore, dedup_stats, modified_parts
from crashmine.pipeline import ingest_deck, load_config, run_pipeline
from crashmine.report import REPORT_SECTIONS
from crashmine.synth import (
    EXISTENCE_PART,
    THRESHOLD_PART,
    crash_fleet,
    dedup_fleet,
    part_mesh,
    random_part_spec,
    random_rotation,
    refine_quads,
    transform_part,
    write_fleet,
)
from crashmine.variants import hier_cluster, two_level_grouping

from conftest import make_part, nodes_of
import oracles

pytestmark = pytest.mark.acceptance
LABELS = ("good", "medium", "poor")


def _table(attrs, classes, results=None):
    n = len(classes)
    results = results if results is not None else np.zeros((n, 1))
    return MiningTable("t", [f"s{i:03d}" for i in range(n)], [f"m{i}" for i in range(n)],
                       list(attrs), np.column_stack(list(attrs.values())),
                       [f"i{j + 1}" for j in range(results.shape[1])], results, list(classes),
                       LABELS)


# -- 1 -------------------------------------------------------------------------

S6 = math.sqrt(6.0)
# (corners, hand-derived area, hand-derived unit normal)
HAND_FIXTURES = [
    ([(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)], 1.0, (0, 0, 1)),
    ([(0, 1, 0), (1, 1, 0), (1, 0, 0), (0, 0, 0)], 1.0, (0, 0, -1)),
    ([(0, 0, 0), (1, 0, 0), (1, 1, 1), (0, 1, 0)], S6 / 2, (-1 / S6, -1 / S6, 2 / S6)),
    ([(0, 0, 0), (2, 0, 0), (2, 0, 3), (0, 0, 3)], 6.0, (0, -1, 0)),
    ([(0, 0, 0), (2, 1, 0), (4, 0, 0), (2, -1, 0)], 4.0, (0, 0, -1)),
    ([(0, 0, 0), (0, 2, 0), (0, 2, 2), (0, 0, 2)], 4.0, (1, 0, 0)),
    ([(1, 1, 1), (3, 1, 1), (3, 4, 1), (1, 4, 1)], 6.0, (0, 0, 1)),
    ([(0, 0, 0), (2, 0, 0), (0, 3, 0)], 3.0, (0, 0, 1)),
    ([(0, 0, 0), (0, 1, 0), (0, 0, 1)], 0.5, (1, 0, 0)),
]


@pytest.mark.criterion(1, "geometry oracle suite")
def test_criterion_1_geometry_oracles():
    t0 = time.perf_counter()
    checked = 0
    for corners, area, normal in HAND_FIXTURES:
        nodes = nodes_of(*corners)
        kind = "shell3" if len(corners) == 3 else "shell4"
        el = Element(1, kind, 1, tuple(range(1, len(corners) + 1)))
        assert element_area(el, nodes) == pytest.approx(area, rel=1e-12)
        np.testing.assert_allclose(element_normal(el, nodes), normal, rtol=0, atol=1e-12)
        checked += 1

    collinear = nodes_of((0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0))
    assert element_area(Element(1, "shell4", 1, (1, 2, 3, 4)), collinear) == 0.0
    checked += 1

    rng = np.random.default_rng(20240501)
    for _ in range(14):
        corners = [tuple(map(float, rng.uniform(-10, 10, 3))) for _ in range(4)]
        area, normal = oracles.quad_area_normal(*corners)
        el = Element(1, "shell4", 1, (1, 2, 3, 4))
        nodes = nodes_of(*corners)
        assert element_area(el, nodes) == pytest.approx(area, rel=1e-12)
        np.testing.assert_allclose(element_normal(el, nodes), normal, rtol=0, atol=1e-12)
        checked += 1
    assert checked >= 20

    z = (0.0, 0.0, 1.0)
    assert abs(dihedral_angle(z, z) - 0.0) <= 1e-12
    assert abs(dihedral_angle(z, (1.0, 0.0, 0.0)) - 90.0) <= 1e-12
    assert abs(dihedral_angle(z, (0.0, 0.0, -1.0)) - 180.0) <= 1e-12
    assert time.perf_counter() - t0 < 1.0


# -- 2 -------------------------------------------------------------------------


@pytest.mark.criterion(2, "metadata invariance under rigid motions")
def test_criterion_2_rigid_motion_invariance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    scalars = ("surface", "mass", "edge_length", "margin_length", "branching_length")
    for p in range(100):
        part = part_mesh(random_part_spec(rng, part_id=p + 1))
        ref = compute_metadata(part)
        extent = max(ref.bbox)
        for _ in range(50):
            r = random_rotation(rng)
            t = rng.uniform(-1000, 1000, 3)
            md = compute_metadata(transform_part(part, r, t))
            for f in scalars:
                a, b = getattr(ref, f), getattr(md, f)
                assert abs(b - a) <= 1e-9 * abs(a), (p, f, a, b)
            np.testing.assert_allclose(md.principal, ref.principal, rtol=1e-9, atol=0)
            expected_cog = r @ np.array(ref.cog) + t
            assert np.max(np.abs(np.array(md.cog) - expected_cog)) <= 1e-9 * extent
    assert time.perf_counter() - t0 < 30.0


# -- 3 -------------------------------------------------------------------------


def _grid(nx, ny, h):
    coords = [(i * h, j * h, 0) for j in range(ny + 1) for i in range(nx + 1)]
    at = lambda i, j: j * (nx + 1) + i + 1  # noqa: E731
    quads = [(at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1))
             for j in range(ny) for i in range(nx)]
    return coords, quads


def _folded(nx, ny, nz, h):
    """An L-shaped sheet: a grid in the xy plane folded up along y = ny*h."""
    coords, quads = _grid(nx, ny, h)
    ids = {}
    for k in range(1, nz + 1):
        for i in range(nx + 1):
            coords.append((i * h, ny * h, k * h))
            ids[(i, k)] = len(coords)
    edge = lambda i: ny * (nx + 1) + i + 1  # noqa: E731
    row = lambda i, k: edge(i) if k == 0 else ids[(i, k)]  # noqa: E731
    quads += [(row(i, k), row(i + 1, k), row(i + 1, k + 1), row(i, k + 1))
              for k in range(nz) for i in range(nx)]
    return coords, quads


def _tee(n, h):
    """Three strips meeting along one line (a branching line)."""
    coords = [(i * h, 0, 0) for i in range(-n, n + 1)] + [(i * h, h, 0) for i in range(-n, n + 1)]
    w = 2 * n + 1
    quads = [(i + 1, i + 2, w + i + 2, w + i + 1) for i in range(2 * n)]
    top = len(coords)
    coords += [(0, 0, h), (0, h, h)]
    quads.append((n + 1, w + n + 1, top + 2, top + 1))
    return coords, quads


@pytest.mark.criterion(3, "mesh independence under 4-way refinement")
def test_criterion_3_refinement():
    fixtures = [_grid(3, 2, 1.0), _grid(5, 4, 2.5), _folded(3, 2, 2, 1.0), _folded(4, 3, 2, 0.5),
                _tee(2, 1.0), _tee(3, 4.0)]
    for coords, quads in fixtures:
        part = make_part(coords, quads, thickness=1.5, density=7.85e-9)
        a, b = compute_metadata(part), compute_metadata(refine_quads(part))
        assert abs(b.surface - a.surface) < 1e-9 * a.surface
        assert abs(b.mass - a.mass) < 1e-9 * a.mass
        scale = max(np.linalg.norm(a.cog), max(a.bbox))
        assert np.linalg.norm(np.subtract(b.cog, a.cog)) < 1e-9 * scale
        assert b.margin_length - a.margin_length == 0.0
        assert b.branching_length - a.branching_length == 0.0

    rng = np.random.default_rng(5)
    for k in range(20):
        part = part_mesh(random_part_spec(rng, part_id=k + 1))
        a, b = compute_metadata(part), compute_metadata(refine_quads(part))
        assert abs(b.surface - a.surface) < 1e-9 * a.surface
        assert abs(b.mass - a.mass) < 1e-9 * a.mass
        scale = max(np.linalg.norm(a.cog), max(a.bbox))
        assert np.linalg.norm(np.subtract(b.cog, a.cog)) < 1e-9 * scale
        assert abs(b.margin_length - a.margin_length) <= 1e-12 * a.margin_length


# -- 4 -------------------------------------------------------------------------


@pytest.mark.criterion(4, "dedup correctness on a planted fleet")
def test_criterion_4_dedup(tmp_path):
    fleet = dedup_fleet(n_sims=10, n_parts=50, n_modified=20, seed=11)
    assert 50 - len(fleet.truth["modified_part_ids"]) == 30
    store = PartStore(tmp_path / "store")
    for sim, text in fleet.decks.items():
        path = tmp_path / f"{sim}.deck"
        path.write_text(text, encoding="utf-8")
        ingest_deck(store, sim, path, previews=False)
    entries = store.entries()
    assert sorted(modified_parts(entries)) == fleet.truth["modified_part_ids"]
    assert store.mesh_file_count() == fleet.truth["distinct"]
    stats = dedup_stats(entries)
    assert stats.total_instances == fleet.truth["total"]
    assert stats.reduction_ratio == fleet.truth["reduction_ratio"]


# -- 5 -------------------------------------------------------------------------


@pytest.mark.criterion(5, "hierarchical clustering equals brute-force oracle")
def test_criterion_5_clustering_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5150)
    linkages = ("single", "complete", "average")
    for i in range(30):
        n = int(rng.integers(2, 13))
        pts = rng.normal(size=(n, int(rng.integers(1, 5)))) * rng.uniform(0.5, 5.0)
        linkage = linkages[i % 3]
        k = int(rng.integers(1, n + 1))
        _, labels = hier_cluster(pts, linkage, k=k)
        assert oracles.canonical(labels) == oracles.cluster(pts, linkage, k=k)
        tree, _ = hier_cluster(pts, linkage, k=1)
        h = float(rng.uniform(0, max(tree.heights())))
        _, labels = hier_cluster(pts, linkage, height=h)
        assert oracles.canonical(labels) == oracles.cluster(pts, linkage, height=h)
    assert time.perf_counter() - t0 < 10.0


# -- 6 -------------------------------------------------------------------------


@pytest.mark.criterion(6, "chi-squared equals the contingency formula")
def test_criterion_6_chi2_oracle():
    rng = np.random.default_rng(66)
    for _ in range(20):
        n = int(rng.integers(10, 60))
        bins = int(rng.integers(2, 8))
        classes = [LABELS[i] for i in rng.integers(0, 3, n)]
        if len(set(classes)) < 2:
            classes[:2] = ["good", "poor"]
        attrs = {f"a{j}": np.round(rng.normal(size=n), int(rng.integers(0, 3))) for j in range(3)}
        got = dict(chi_squared_rank(_table(attrs, classes), bins=bins).items)
        for name, col in attrs.items():
            want = oracles.chi2(discretize(col, bins).tolist(), classes)
            assert abs(got[name] - want) <= 1e-9 * max(1.0, want)

    perfect = _table({"a": np.array([0.0] * 5 + [1.0] * 5)}, ["good"] * 5 + ["poor"] * 5)
    assert chi_squared_rank(perfect, bins=2).items[0][1] == 10.0
    const = _table({"c": np.full(10, 3.0)}, ["good"] * 5 + ["poor"] * 5)
    assert chi_squared_rank(const).items[0][1] == 0.0


# -- 7 -------------------------------------------------------------------------


@pytest.mark.criterion(7, "tree recovers existence root and threshold second level")
def test_criterion_7_tree_recovery(tmp_path):
    fleet = crash_fleet(n_sims=30, seed=7)
    store = PartStore(tmp_path / "store")
    for sim, text in fleet.decks.items():
        path = tmp_path / f"{sim}.deck"
        path.write_text(text, encoding="utf-8")
        ingest_deck(store, sim, path, previews=False)
    entries = store.entries()
    grouping = two_level_grouping(entries)
    table = assemble_table(entries, grouping, parse_results_csv(fleet.results_csv))
    table, _ = kmeans_classes(table, k=3, seed=42)
    assert dict(zip(table.simulation_ids, table.classes)) == fleet.truth["classes"]

    tree = build_tree(table, "class", confidence=0.25, min_instances=2)
    root = tree.root
    existence = next(a for a in table.attributes if a.endswith(f"_p{EXISTENCE_PART}"))
    threshold = next(a for a in table.attributes if a.endswith(f"_p{THRESHOLD_PART}"))
    assert root.attribute == existence
    col = table.attribute(existence)
    assert 0.0 <= root.threshold < col[col > 0].min()
    second = [n.attribute for n in (root.left, root.right) if not n.is_leaf]
    assert second == [threshold]

    grown = DecisionTree(tree.unpruned, tree.attributes, tree.class_labels, 0.25, 2)
    rows = [dict(zip(table.attributes, r)) for r in table.values]
    assert [grown.classify(r) for r in rows] == table.classes
    assert tree.size() <= tree.unpruned.size()

    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(10, 50))
        attrs = {f"a{j}": rng.integers(0, 6, n).astype(float) for j in range(4)}
        classes = [LABELS[i] for i in rng.integers(0, 3, n)]
        t = build_tree(_table(attrs, classes), "class", 0.25, 2)
        assert t.size() <= t.unpruned.size()


# -- 8 -------------------------------------------------------------------------


def _blobs(seed=0):
    rng = np.random.default_rng(seed)
    factors = np.array([1.0, 0.8, 1.2, 0.6])
    rows = [c * factors + rng.normal(0, 3.0, 4) for c in (80.0, 20.0, 45.0) for _ in range(10)]
    perm = rng.permutation(30)
    res = np.array(rows)[perm]
    blob = np.repeat([2, 0, 1], 10)[perm]  # 0 = lowest intrusion
    return res, blob


_DETERMINISM_SCRIPT = """
import numpy as np, sys
sys.path.insert(0, {tests!r})
from test_acceptance import _blobs, _table
from crashmine.mining.kmeans import kmeans_classes
from crashmine.mining.arff import write_arff
res, _ = _blobs()
t = _table({{"a": np.arange(30.0)}}, ["good"] * 30, res)
t2, km = kmeans_classes(t, seed=42)
sys.stdout.write(write_arff(t2) + km.centers.tobytes().hex())
"""


@pytest.mark.criterion(8, "k-means determinism and good-class labelling")
def test_criterion_8_kmeans():
    res, blob = _blobs()
    table = _table({"a": np.arange(30.0)}, ["good"] * 30, res)
    runs = [kmeans_classes(table, seed=42) for _ in range(3)]
    texts = {write_arff(t) + km.centers.tobytes().hex() for t, km in runs}
    assert len(texts) == 1

    script = _DETERMINISM_SCRIPT.format(tests=os.path.dirname(__file__))
    outs = set()
    for hash_seed in ("0", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        proc = subprocess.run([sys.executable, "-c", script], capture_output=True, text=True,
                              env=env, check=True)
        outs.add(proc.stdout)
    assert outs == texts

    good_runs = 0
    for seed in range(100):
        labelled, _ = kmeans_classes(table, seed=seed)
        low = {c for c, b in zip(labelled.classes, blob) if b == 0}
        if low == {"good"} and labelled.classes.count("good") == 10:
            good_runs += 1
    assert good_runs == 100


# -- 9 -------------------------------------------------------------------------


@pytest.mark.criterion(9, "end-to-end run is reproducible and complete")
def test_criterion_9_end_to_end(tmp_path):
    cfg_path = write_fleet(crash_fleet(n_sims=30, seed=7), tmp_path)
    t0 = time.perf_counter()
    first = run_pipeline(load_config(cfg_path))
    elapsed = time.perf_counter() - t0
    first_bytes = {p.relative_to(first.root): p.read_bytes() for p in first.files}

    second = run_pipeline(load_config(cfg_path))
    assert second.digest == first.digest
    assert {p.relative_to(second.root): p.read_bytes() for p in second.files} == first_bytes

    cfg = load_config(cfg_path)
    cfg.store = tmp_path / "fresh_store"
    cfg.output = tmp_path / "fresh_report"
    assert run_pipeline(cfg).digest != first.digest  # the config echo differs ...
    fresh = {p.relative_to(cfg.output): p.read_bytes() for p in (cfg.output).rglob("*")
             if p.is_file() and p.name not in ("manifest.json", "report.md")}
    for rel, data in fresh.items():  # ... but every artifact is byte-identical
        assert first_bytes[rel] == data

    text = first.report.read_text(encoding="utf-8")
    headings = [line[2:] for line in text.splitlines() if line.startswith("# ")]
    assert headings == list(REPORT_SECTIONS)
    assert first.figures and all(f.is_file() for f in first.figures)
    for line in text.split("# Figure index", 1)[1].splitlines():
        if line.startswith("- "):
            assert (first.root / line[2:].split(":", 1)[0]).is_file()
    manifest = json.loads((first.root / "manifest.json").read_text(encoding="utf-8"))
    for rel, digest in manifest["files"].items():
        assert _md5(first.root / rel) == digest
    assert elapsed < 60.0


def _md5(path):
    import hashlib

    return hashlib.md5(path.read_bytes()).hexdigest()
