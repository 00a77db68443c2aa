"""The one-row-per-crash-test mining table."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..errors import MiningError
from ..metageom import FEATURES
from ..partstore import CatalogEntry, modified_parts
from ..variants import (FeatureMatrix, PartGrouping, SimilarityWeights, similarity_value,
                        standardize)

# value given to the least similar present variant; absence is 0
PRESENT_OFFSET = 1.0


@dataclass(frozen=True)
class IntrusionResult:
    simulation_id: str
    values: dict[str, float]


@dataclass
class MiningTable:
    name: str
    simulation_ids: list[str]
    model_names: list[str]
    attributes: list[str]
    values: np.ndarray
    result_names: list[str]
    results: np.ndarray
    classes: list[str] | None = None
    class_labels: tuple[str, ...] = ()
    attribute_clusters: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.simulation_ids)
        self.values = np.asarray(self.values, dtype=float).reshape(n, len(self.attributes))
        self.results = np.asarray(self.results, dtype=float).reshape(n, len(self.result_names))
        if len(self.model_names) != n:
            raise MiningError("model_names length does not match row count")
        if self.classes is not None and len(self.classes) != n:
            raise MiningError("class column length does not match row count")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.results))):
            raise MiningError("mining table contains non-finite values")

    @property
    def n_rows(self):
        return len(self.simulation_ids)

    def attribute(self, name) -> np.ndarray:
        return self.values[:, self.attributes.index(name)]

    def result(self, name) -> np.ndarray:
        return self.results[:, self.result_names.index(name)]

    def with_classes(self, classes, class_labels) -> "MiningTable":
        return replace(self, classes=list(classes), class_labels=tuple(class_labels))


def parse_results_csv(text: str) -> list[IntrusionResult]:
    """Results file: header ``simulation_id,<intrusion>...``, values in mm."""
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        return []
    header = [h.strip() for h in rows[0]]
    if header[0] != "simulation_id":
        raise MiningError("results CSV must start with a 'simulation_id' column")
    names = header[1:]
    if len(set(names)) != len(names):
        raise MiningError("duplicate intrusion column names in results CSV")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MiningError(f"results line {lineno}: expected {len(header)} fields")
        try:
            vals = {n: float(v) for n, v in zip(names, row[1:])}
        except ValueError as exc:
            raise MiningError(f"results line {lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals.values()):
            raise MiningError(f"results line {lineno}: non-finite value")
        out.append(IntrusionResult(row[0].strip(), vals))
    return out


def read_results_csv(path) -> list[IntrusionResult]:
    return parse_results_csv(Path(path).read_text(encoding="utf-8"))


def _representative_part(entries):
    counts = Counter(e.part_id for e in entries)
    best = max(counts.values())
    return min(p for p, c in counts.items() if c == best)


def assemble_table(entries: list[CatalogEntry], grouping: PartGrouping,
                   results: list[IntrusionResult], weights: SimilarityWeights | None = None,
                   name: str = "crashmine", features=FEATURES) -> MiningTable:
    """Build the mining table.

    One row per simulation with results (sorted by id). Only part clusters with
    more than one digest over those simulations become attributes, in cluster
    order. A present part gets its similarity value, computed on features
    standardized over the cluster's present instances and shifted so the
    smallest present value is ``PRESENT_OFFSET``; an absent part gets 0.
    """
    weights = weights or SimilarityWeights.uniform(features)
    seen = Counter(r.simulation_id for r in results)
    dup = sorted(s for s, c in seen.items() if c > 1)
    if dup:
        raise MiningError(f"duplicate simulation ids in results: {dup}")
    if not results:
        return MiningTable(name, [], [], [], np.empty((0, 0)), [], np.empty((0, 0)))

    result_names = list(results[0].values)
    for r in results:
        if list(r.values) != result_names:
            raise MiningError(f"simulation {r.simulation_id}: intrusion names differ from "
                              f"{result_names}")

    sims = sorted(seen)
    by_sim = defaultdict(list)
    for e in entries:
        by_sim[e.simulation_id].append(e)
    for s in sims:
        if not by_sim.get(s):
            raise MiningError(f"simulation {s} has results but no parts in the catalog")

    filtered = [e for s in sims for e in sorted(by_sim[s], key=lambda e: e.part_id)]
    cluster_of = grouping.part_cluster
    modified = sorted(modified_parts(filtered, key=lambda e: cluster_of[e.key]))
    ref = np.abs(FeatureMatrix.from_metadata(
        [e.key for e in entries], [e.metadata for e in entries], features).values).max(axis=0)

    row_of = {s: i for i, s in enumerate(sims)}
    values = np.zeros((len(sims), len(modified)))
    attributes, attribute_clusters = [], {}
    for col, c in enumerate(modified):
        members = [e for e in filtered if cluster_of[e.key] == c]
        per_sim = defaultdict(list)
        for e in members:
            per_sim[e.simulation_id].append(e)
        clash = {s: [e.part_id for e in es] for s, es in per_sim.items() if len(es) > 1}
        if clash:
            s, pids = sorted(clash.items())[0]
            raise MiningError(
                f"simulation {s} has parts {pids} in one part cluster {c}; "
                f"lower the coarse cut height")
        present = sorted(per_sim)
        fm = FeatureMatrix.from_metadata(present, [per_sim[s][0].metadata for s in present],
                                         features)
        norm = standardize(fm, ref)
        sim_values = np.array([similarity_value(per_sim[s][0].metadata, weights, norm)
                               for s in present])
        sim_values = sim_values - sim_values.min() + PRESENT_OFFSET
        for s, v in zip(present, sim_values):
            values[row_of[s], col] = v
        label = f"pc{c}_p{_representative_part([e for e in entries if cluster_of[e.key] == c])}"
        attributes.append(label)
        attribute_clusters[label] = c

    model_names = [sorted(by_sim[s], key=lambda e: e.part_id)[0].source_model for s in sims]
    res = np.array([[r.values[n] for n in result_names]
                    for r in sorted(results, key=lambda r: r.simulation_id)])
    return MiningTable(name, sims, model_names, attributes, values, result_names, res,
                       attribute_clusters=attribute_clusters)
