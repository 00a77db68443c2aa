"""End-to-end run: decks and results in, report bundle out.

Stages run in a fixed order; each failure is re-raised as :class:`StageError`
naming the stage. Store writes from an aborted run are harmless because the
store is content addressed and ingestion is idempotent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .deck import read_deck
from .disassemble import disassemble
from .errors import ConfigError, CrashMineError
from .metageom import DEFAULT_ANGLE_THRESHOLD, compute_metadata
from .mining.arff import write_arff
from .mining.chi2 import chi_squared_rank
from .mining.kmeans import kmeans_classes
from .mining.table import assemble_table, read_results_csv
from .mining.tree import build_tree
from .partstore import PartStore, dedup_stats, modified_parts
from .report import render_part_preview, render_scatter, write_report
from .variants import (DEFAULT_COARSE_CUT, DEFAULT_FINE_CUT, DEFAULT_LINKAGE, LINKAGES,
                       SimilarityWeights, load_weights, two_level_grouping)

log = logging.getLogger(__name__)

STAGES = ("parse", "disassemble", "metadata", "ingest", "cluster", "table", "classes", "rank",
          "tree", "report")
MINING_STAGES = STAGES[4:]
TOP_PREVIEWS = 6


class StageError(CrashMineError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3 if isinstance(cause, OSError) else 2)


@dataclass
class PipelineConfig:
    decks: list[tuple[str, Path]] = field(default_factory=list)
    results: Path | None = None
    store: Path = Path("store")
    output: Path = Path("report")
    angle_threshold: float = DEFAULT_ANGLE_THRESHOLD
    linkage: str = DEFAULT_LINKAGE
    coarse_cut: float = DEFAULT_COARSE_CUT
    fine_cut: float = DEFAULT_FINE_CUT
    weights: Path | None = None
    result_columns: list[str] | None = None
    k: int = 3
    seed: int = 42
    chi2_bins: int = 10
    tree_confidence: float = 0.25
    tree_min_instances: int = 2
    name: str = "crashmine"

    def validate(self, need_files: bool = True):
        if not self.decks:
            raise ConfigError("no simulations configured (add deck.<simulation_id> = <path>)")
        sims = [s for s, _ in self.decks]
        if len(set(sims)) != len(sims):
            raise ConfigError("duplicate simulation ids in deck list")
        if self.results is None:
            raise ConfigError("results CSV not configured")
        if not 0 < self.angle_threshold < 180:
            raise ConfigError("angle_threshold must lie in (0, 180)")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"linkage must be one of {LINKAGES}")
        if not (math.isfinite(self.coarse_cut) and 0 <= self.fine_cut < self.coarse_cut):
            raise ConfigError("need 0 <= fine_cut < coarse_cut")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.chi2_bins < 1:
            raise ConfigError("chi2_bins must be >= 1")
        if not 0 < self.tree_confidence < 1:
            raise ConfigError("tree_confidence must lie in (0, 1)")
        if self.tree_min_instances < 1:
            raise ConfigError("tree_min_instances must be >= 1")
        if need_files:
            paths = [p for _, p in self.decks] + [self.results]
            if self.weights is not None:
                paths.append(self.weights)
            for p in paths:
                if not Path(p).is_file():
                    raise ConfigError(f"input file not found: {p}")

    def echo(self) -> dict:
        d = asdict(self)
        d["decks"] = [[s, str(p)] for s, p in self.decks]
        for key in ("results", "store", "output", "weights"):
            d[key] = None if d[key] is None else str(d[key])
        return d


_CASTS = {
    "angle_threshold": float, "coarse_cut": float, "fine_cut": float, "k": int, "seed": int,
    "chi2_bins": int, "tree_confidence": float, "tree_min_instances": int,
}
_PATHS = ("results", "store", "output", "weights")


def parse_config(text: str, base_dir=".") -> PipelineConfig:
    """Flat ``key = value`` config; ``deck.<simulation_id> = <path>`` adds a model."""
    base = Path(base_dir)
    cfg = PipelineConfig()
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.startswith("deck."):
            cfg.decks.append((key[5:], base / value))
        elif key in _PATHS:
            setattr(cfg, key, base / value if value else None)
        elif key in _CASTS:
            try:
                setattr(cfg, key, _CASTS[key](value))
            except ValueError:
                raise ConfigError(f"config line {n}: bad value for {key}: {value!r}") from None
        elif key == "linkage":
            cfg.linkage = value
        elif key == "name":
            cfg.name = value
        elif key == "result_columns":
            cfg.result_columns = [c.strip() for c in value.split(",") if c.strip()] or None
        else:
            raise ConfigError(f"config line {n}: unknown key {key!r}")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path.parent)


def file_md5(path) -> str:
    h = hashlib.md5()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ReportBundle:
    root: Path
    report: Path
    figures: list[Path]
    files: list[Path]
    manifest: dict

    @property
    def digest(self) -> str:
        return bundle_digest(self.manifest)


def bundle_digest(manifest: dict) -> str:
    """Hash of the manifest without its timestamp; covers every bundle file."""
    stable = {k: v for k, v in manifest.items() if k != "created"}
    return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


def ingest_deck(store: PartStore, sim_id: str, path, angle_threshold=DEFAULT_ANGLE_THRESHOLD,
                previews=True, _stage=None):
    """Parse one deck and store all its parts. Returns the catalog entries."""
    def stage(name):
        if _stage is not None:
            _stage(name)

    stage("parse")
    deck = read_deck(path)
    stage("disassemble")
    parts = disassemble(deck)
    stage("metadata")
    metas = [compute_metadata(p, angle_threshold) for p in parts]
    stage("ingest")
    entries = []
    for part, meta in zip(parts, metas):
        entry = store.ingest(part, meta, sim_id)
        if previews:
            render_part_preview(part, store.previews_dir, entry.digest)
        entries.append(entry)
    return entries


class _Runner:
    def __init__(self):
        self.current = None

    def __call__(self, name):
        log.info("stage %s", name)
        self.current = name


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def run_pipeline(config: PipelineConfig, dry_run: bool = False, ingest: bool = True):
    """Run every stage; with ``dry_run`` only return the stage names.

    ``ingest=False`` skips parse..ingest and mines what the store already holds
    for the configured simulations.
    """
    stages = list(STAGES if ingest else MINING_STAGES)
    config.validate(need_files=not dry_run and ingest)
    if dry_run:
        return stages
    runner = _Runner()
    try:
        return _run(config, runner, ingest)
    except CrashMineError as exc:
        if isinstance(exc, StageError):
            raise
        raise StageError(runner.current or "setup", exc) from exc
    except OSError as exc:
        raise StageError(runner.current or "setup", exc) from exc


def _run(config: PipelineConfig, stage, ingest: bool) -> ReportBundle:
    store = PartStore(config.store)
    sims = [s for s, _ in config.decks]
    if ingest:
        for sim, path in config.decks:
            ingest_deck(store, sim, path, config.angle_threshold, _stage=stage)

    stage("cluster")
    entries = store.entries(sims)
    missing = sorted(set(sims) - {e.simulation_id for e in entries})
    if missing:
        raise ConfigError(f"simulations not in store: {missing}")
    weights = load_weights(config.weights) if config.weights else SimilarityWeights.uniform()
    grouping = two_level_grouping(entries, config.coarse_cut, config.fine_cut, config.linkage)

    stage("table")
    results = read_results_csv(config.results)
    unknown = sorted({r.simulation_id for r in results} - set(sims))
    if unknown:
        raise ConfigError(f"results for unconfigured simulations: {unknown}")
    table = assemble_table(entries, grouping, results, weights, config.name)

    stage("classes")
    table, km = kmeans_classes(table, config.result_columns, config.k, config.seed)

    stage("rank")
    ranking = chi_squared_rank(table, "class", config.chi2_bins)

    stage("tree")
    tree = build_tree(table, "class", config.tree_confidence, config.tree_min_instances)

    stage("report")
    out = Path(config.output)
    out.mkdir(parents=True, exist_ok=True)
    if (out / "figures").exists():
        shutil.rmtree(out / "figures")
    files = {}

    def emit(rel, text):
        _write(out / rel, text)
        files[rel] = out / rel

    emit("table.arff", write_arff(table))
    emit("ranking.tsv", ranking.to_text())
    emit("tree.txt", tree.to_text())
    emit("tree.dot", tree.to_dot())

    group_lines = ["simulation_id\tpart_id\tdigest\tpart_cluster\tvariant"]
    for e in entries:
        group_lines.append(f"{e.simulation_id}\t{e.part_id}\t{e.digest}\t"
                           f"{grouping.part_cluster[e.key]}\t{grouping.variant[e.key]}")
    emit("groups.tsv", "\n".join(group_lines) + "\n")

    columns = config.result_columns or table.result_names
    class_lines = ["simulation_id,model_name,class," + ",".join(columns)]
    for i, sim in enumerate(table.simulation_ids):
        vals = ",".join(repr(float(table.result(c)[i])) for c in columns)
        class_lines.append(f"{sim},{table.model_names[i]},{table.classes[i]},{vals}")
    emit("classes.csv", "\n".join(class_lines) + "\n")

    stats = dedup_stats(entries)
    cluster_key = lambda e: grouping.part_cluster[e.key]  # noqa: E731
    n_modified = len(modified_parts(entries, sims, key=cluster_key))
    emit("dedup.json", json.dumps({**asdict(stats), "part_clusters": len(grouping.clusters()),
                                   "modified_part_clusters": n_modified},
                                  indent=2, sort_keys=True) + "\n")

    figures = []
    pairs = [(columns[i], columns[i + 1]) for i in range(0, len(columns) - 1, 2)]
    if len(columns) % 2 == 1 and len(columns) > 1:
        pairs.append((columns[-2], columns[-1]))
    for a, b in pairs:
        rel = f"figures/classes_{a}_vs_{b}.svg"
        pts = list(zip(table.result(a), table.result(b), table.classes))
        emit(rel, render_scatter(pts, f"{a} [mm]", f"{b} [mm]", f"result classes: {a} vs {b}"))
        figures.append((rel, f"k-means classes over {a} and {b}"))
    total = table.results.sum(axis=1) if table.result_names else np.zeros(table.n_rows)
    if ranking.items:
        top = ranking.items[0][0]
        rel = "figures/top_attribute_vs_total.svg"
        pts = list(zip(table.attribute(top), total, table.classes))
        emit(rel, render_scatter(pts, top, "total intrusion [mm]",
                                 f"{top} vs total intrusion"))
        figures.append((rel, f"similarity of {top} against total intrusion"))
    if len(columns) == 1:
        rel = f"figures/classes_{columns[0]}.svg"
        pts = list(zip(range(table.n_rows), table.result(columns[0]), table.classes))
        emit(rel, render_scatter(pts, "row", f"{columns[0]} [mm]"))
        figures.append((rel, f"k-means classes over {columns[0]}"))

    for name, _ in ranking.items[:TOP_PREVIEWS]:
        c = table.attribute_clusters[name]
        digest = sorted({e.digest for e in entries if grouping.part_cluster[e.key] == c})[0]
        for plane in ("xy", "xz", "yz"):
            src = store.previews_dir / f"{digest}_{plane}.svg"
            if not src.exists():
                render_part_preview(store.load_mesh(digest), store.previews_dir, digest)
            rel = f"figures/previews/{name}_{plane}.svg"
            emit(rel, src.read_text(encoding="utf-8"))
            figures.append((rel, f"{name} preview ({plane} projection)"))

    cluster_parts = {}
    for e in entries:
        cluster_parts.setdefault(grouping.part_cluster[e.key], set()).add(e.part_id)
    inputs = [f"- {sim}: {path} (md5 {file_md5(path)})" for sim, path in config.decks]
    inputs.append(f"- results: {config.results} (md5 {file_md5(config.results)})")
    inputs.append(f"- angle threshold {config.angle_threshold} deg, linkage {config.linkage}, "
                  f"cuts {config.coarse_cut}/{config.fine_cut}")
    inputs.append("")
    inputs.append("| attribute | part cluster | part numbers |")
    inputs.append("|---|---|---|")
    for name in table.attributes:
        c = table.attribute_clusters[name]
        inputs.append(f"| {name} | {c} | {', '.join(map(str, sorted(cluster_parts[c])))} |")
    dedup = [f"- part instances: {stats.total_instances}",
             f"- distinct sub-meshes: {stats.distinct_digests}",
             f"- reduction: {stats.reduction_ratio:.1%}",
             f"- part clusters: {len(grouping.clusters())}, modified: {n_modified}"]
    clustering = [f"k = {config.k}, seed {config.seed}, columns: {', '.join(columns)}", ""]
    clustering.append("| class | models | " + " | ".join(f"mean {c}" for c in columns) + " |")
    clustering.append("|---|---|" + "---|" * len(columns))
    for label in table.class_labels:
        idx = [i for i, c in enumerate(table.classes) if c == label]
        means = [float(np.mean(table.result(c)[idx])) if idx else float("nan") for c in columns]
        clustering.append(f"| {label} | {len(idx)} | " +
                          " | ".join(f"{m:.2f}" for m in means) + " |")
    emit("report.md", write_report(out, inputs, dedup, ranking, tree, clustering, figures))

    inputs_md5 = {f"deck.{sim}": file_md5(path) for sim, path in config.decks}
    inputs_md5["results"] = file_md5(config.results)
    if config.weights:
        inputs_md5["weights"] = file_md5(config.weights)
    manifest = {
        "tool": "crashmine",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config.echo(),
        "stages": list(STAGES),
        "inputs": inputs_md5,
        "files": {rel: file_md5(p) for rel, p in sorted(files.items())},
        "kmeans": {"objective": km.objective, "iterations": km.n_iter},
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return ReportBundle(out, out / "report.md", [out / rel for rel, _ in figures],
                        sorted(files.values()), manifest)
