"""Part identification and variant grouping in meta-data space.

Parts are points in a standardized feature space. Agglomerative clustering
with a coarse cut recovers physical-part identity across models (immune to
renumbering); a fine cut inside each part cluster separates design variants.
A weighted sum of standardized features gives each part one scalar
similarity value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ClusterError, ConfigError
from .metageom import FEATURES, PartMetadata

LINKAGES = ("average", "single", "complete")
DEFAULT_LINKAGE = "average"
DEFAULT_COARSE_CUT = 3.0
DEFAULT_FINE_CUT = 0.5
# a column whose spread is below this fraction of its reference scale counts as constant
CONSTANT_RTOL = 1e-9
# merge candidates closer than this (relative) to the best distance count as tied
TIE_RTOL = 1e-12


@dataclass
class FeatureMatrix:
    rows: list
    features: tuple[str, ...]
    values: np.ndarray
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @classmethod
    def from_metadata(cls, rows, metadata: Sequence[PartMetadata], features=FEATURES):
        feats = [m.features() for m in metadata]
        values = np.array([[f[name] for name in features] for f in feats], dtype=float)
        return cls(list(rows), tuple(features), values.reshape(len(feats), len(features)))

    def column(self, name):
        return self.values[:, self.features.index(name)]


def standardize(matrix: FeatureMatrix, reference_scale=None) -> FeatureMatrix:
    """Population z-scores per column; constant columns become zeros.

    A column is constant when its standard deviation does not exceed
    ``CONSTANT_RTOL`` times its reference scale (default: the column's own
    largest magnitude). The returned matrix keeps the raw mean and the
    effective std (0 for constant columns) so new points can be projected.
    """
    x = np.asarray(matrix.values, dtype=float)
    if x.shape[0] < 2:
        raise ClusterError("standardization needs at least two rows")
    if not np.all(np.isfinite(x)):
        raise ClusterError("feature matrix contains non-finite values")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    ref = np.abs(x).max(axis=0) if reference_scale is None else np.asarray(reference_scale)
    const = std <= CONSTANT_RTOL * ref
    std = np.where(const, 0.0, std)
    z = np.zeros_like(x)
    live = ~const
    z[:, live] = (x[:, live] - mean[live]) / std[live]
    return FeatureMatrix(list(matrix.rows), matrix.features, z, mean, std)


def project(values, mean, std) -> np.ndarray:
    """Standardize raw feature values with a stored mean/std (std 0 maps to 0)."""
    values = np.asarray(values, dtype=float)
    out = np.zeros_like(values)
    live = std > 0
    out[..., live] = (values[..., live] - mean[live]) / std[live]
    return out


@dataclass
class ClusterTree:
    """Merge history of an agglomerative clustering.

    ``merges[t] = (a, b, height, size)`` joins clusters ``a < b`` into cluster
    ``n_leaves + t``; ids below ``n_leaves`` are single rows.
    """

    n_leaves: int
    merges: list[tuple[int, int, float, int]] = field(default_factory=list)

    def heights(self):
        return [m[2] for m in self.merges]

    def cut(self, height: float | None = None, k: int | None = None) -> list[int]:
        """Flat labels, numbered in order of first appearance.

        With ``height`` the merges at or below that height are applied (stopping
        at the first higher merge); with ``k`` the first ``n - k`` merges are.
        """
        n = self.n_leaves
        if (height is None) == (k is None):
            raise ValueError("give exactly one of height or k")
        if k is not None:
            if not 1 <= k <= max(n, 1):
                raise ClusterError(f"k={k} outside [1, {n}]")
            steps = n - k
            if steps > len(self.merges):
                raise ClusterError(f"tree has no {k}-cluster level")
        else:
            steps = 0
            for m in self.merges:
                if m[2] > height:
                    break
                steps += 1
        parent = list(range(n + len(self.merges)))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for t in range(steps):
            a, b, _, _ = self.merges[t]
            parent[find(a)] = n + t
            parent[find(b)] = n + t
        labels, seen = [], {}
        for i in range(n):
            r = find(i)
            labels.append(seen.setdefault(r, len(seen)))
        return labels


def _pairwise(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def agglomerate(x, linkage: str = DEFAULT_LINKAGE, cannot_link=None) -> ClusterTree:
    """Agglomerative clustering under Euclidean distance.

    Cluster distances are updated with the Lance-Williams recurrences. Among
    pairs tied at the minimum distance the pair with the smallest (i, j) is
    merged, where a cluster is indexed by its smallest row.

    ``cannot_link`` is an optional boolean (rows x groups) membership matrix:
    two clusters that share a group are never merged, so the tree may stop
    before a single root.
    """
    if linkage not in LINKAGES:
        raise ConfigError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    tree = ClusterTree(n)
    if n < 2:
        return tree
    d = _pairwise(x)
    np.fill_diagonal(d, np.inf)
    active = np.ones(n, dtype=bool)
    size = np.ones(n, dtype=int)
    cid = list(range(n))  # slot -> current cluster id
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    groups = None
    if cannot_link is not None:
        groups = np.array(cannot_link, dtype=bool).reshape(n, -1).copy()

    for t in range(n - 1):
        mask = upper & active[:, None] & active[None, :]
        if groups is not None:
            g = groups.astype(np.int64)
            mask &= (g @ g.T) == 0
        dm = np.where(mask, d, np.inf)
        best = dm.min()
        if not np.isfinite(best):
            break
        tol = TIE_RTOL * max(1.0, abs(best))
        i, j = map(int, np.argwhere(dm <= best + tol)[0])
        h = float(d[i, j])
        ni, nj = size[i], size[j]
        if linkage == "single":
            new = np.minimum(d[i], d[j])
        elif linkage == "complete":
            new = np.maximum(d[i], d[j])
        else:
            new = (ni * d[i] + nj * d[j]) / (ni + nj)
        d[i, :] = new
        d[:, i] = new
        d[i, i] = np.inf
        active[j] = False
        d[j, :] = np.inf
        d[:, j] = np.inf
        size[i] = ni + nj
        if groups is not None:
            groups[i] |= groups[j]
            groups[j] = False
        a, b = sorted((cid[i], cid[j]))
        tree.merges.append((a, b, h, int(size[i])))
        cid[i] = n + t
    return tree


def hier_cluster(matrix, linkage: str = DEFAULT_LINKAGE, height: float | None = None,
                 k: int | None = None) -> tuple[ClusterTree, list[int]]:
    """Cluster the rows of a standardized matrix and cut the dendrogram."""
    x = matrix.values if isinstance(matrix, FeatureMatrix) else matrix
    tree = agglomerate(x, linkage)
    if k is not None and not 1 <= k <= tree.n_leaves:
        raise ClusterError(f"k={k} outside [1, {tree.n_leaves}]")
    labels = tree.cut(height=height, k=k)
    return tree, labels


@dataclass
class PartGrouping:
    """Two-level labels per catalog key ``(simulation_id, part_id)``."""

    part_cluster: dict[tuple[str, int], int]
    variant: dict[tuple[str, int], int]

    def clusters(self):
        return sorted(set(self.part_cluster.values()))

    def members(self, cluster):
        return sorted(k for k, c in self.part_cluster.items() if c == cluster)


def two_level_grouping(entries, coarse: float = DEFAULT_COARSE_CUT,
                       fine: float = DEFAULT_FINE_CUT, linkage: str = DEFAULT_LINKAGE,
                       features=FEATURES, separate_simulations: bool = True) -> PartGrouping:
    """Assign every catalog entry a part cluster and a variant within it.

    Identical digests share one row, so exact duplicates always share a
    variant. The coarse cut runs on features standardized over the whole
    catalog; each part cluster is then re-standardized on its own members
    (constant-column test still against catalog-wide magnitudes) and cut at
    the fine height.

    With ``separate_simulations`` the coarse level never puts two parts of the
    same model into one cluster: a vehicle holds each physical part once.
    """
    entries = sorted(entries, key=lambda e: e.key)
    if not entries:
        raise ClusterError("no catalog entries to group")
    if fine >= coarse:
        raise ConfigError(f"fine cut {fine} must be below coarse cut {coarse}")

    digests, meta = [], []
    for e in entries:
        if e.digest not in digests:
            digests.append(e.digest)
            meta.append(e.metadata)
    raw = FeatureMatrix.from_metadata(digests, meta, features)
    ref = np.abs(raw.values).max(axis=0)

    if len(digests) == 1:
        coarse_labels = [0]
    else:
        link = None
        if separate_simulations:
            sims = sorted({e.simulation_id for e in entries})
            col = {s: j for j, s in enumerate(sims)}
            row = {d: i for i, d in enumerate(digests)}
            link = np.zeros((len(digests), len(sims)), dtype=bool)
            for e in entries:
                link[row[e.digest], col[e.simulation_id]] = True
        tree = agglomerate(standardize(raw, ref).values, linkage, link)
        coarse_labels = tree.cut(height=coarse)

    variant_of = {}
    for c in sorted(set(coarse_labels)):
        idx = [i for i, lab in enumerate(coarse_labels) if lab == c]
        if len(idx) == 1:
            variant_of[digests[idx[0]]] = 0
            continue
        sub = FeatureMatrix([digests[i] for i in idx], raw.features, raw.values[idx])
        _, fine_labels = hier_cluster(standardize(sub, ref), linkage, height=fine)
        for i, lab in zip(idx, fine_labels):
            variant_of[digests[i]] = lab

    cluster_of = dict(zip(digests, coarse_labels))
    return PartGrouping(
        part_cluster={e.key: cluster_of[e.digest] for e in entries},
        variant={e.key: variant_of[e.digest] for e in entries},
    )


@dataclass(frozen=True)
class SimilarityWeights:
    weights: dict[str, float]

    def __post_init__(self):
        if not self.weights:
            raise ConfigError("weights must name at least one feature")
        for name, w in self.weights.items():
            if name not in FEATURES:
                raise ConfigError(f"unknown feature {name!r} in weights")
            if not math.isfinite(w) or w < 0:
                raise ConfigError(f"weight for {name!r} must be finite and >= 0, got {w}")
        total = sum(self.weights.values())
        if total <= 0:
            raise ConfigError("at least one weight must be positive")
        object.__setattr__(self, "weights", {k: v / total for k, v in self.weights.items()})

    @classmethod
    def uniform(cls, features=FEATURES):
        return cls({f: 1.0 for f in features})

    def vector(self, features=FEATURES) -> np.ndarray:
        return np.array([self.weights.get(f, 0.0) for f in features])


def parse_weights(text: str) -> SimilarityWeights:
    weights = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"weights line {n}: expected 'name = value'")
        name, value = (s.strip() for s in line.split("=", 1))
        try:
            weights[name] = float(value)
        except ValueError:
            raise ConfigError(f"weights line {n}: bad number {value!r}") from None
    return SimilarityWeights(weights)


def load_weights(path) -> SimilarityWeights:
    return parse_weights(Path(path).read_text(encoding="utf-8"))


def similarity_value(metadata: PartMetadata | dict, weights: SimilarityWeights,
                     normalization: FeatureMatrix) -> float:
    """Weighted sum of standardized features, ``sum_k w_k z_k``.

    ``normalization`` supplies the feature names and the per-feature mean/std
    (a matrix returned by :func:`standardize`).
    """
    unknown = set(weights.weights) - set(normalization.features)
    if unknown:
        raise ConfigError(f"weights name features not in the normalization: {sorted(unknown)}")
    feats = metadata.features() if isinstance(metadata, PartMetadata) else metadata
    raw = np.array([feats[f] for f in normalization.features], dtype=float)
    z = project(raw, normalization.mean, normalization.std)
    w = weights.vector(normalization.features)
    return float(sum(wi * zi for wi, zi in zip(w, z)))
