"""Grouping crash results into quality classes with seeded k-means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MiningError
from .table import MiningTable

DEFAULT_SEED = 42
DEFAULT_MAX_ITER = 100
DEFAULT_N_INIT = 10


def class_names(k: int) -> tuple[str, ...]:
    """Labels from best (lowest intrusion) to worst."""
    if k == 3:
        return ("good", "medium", "poor")
    if k == 2:
        return ("good", "poor")
    return tuple(f"class{i + 1}" for i in range(k))


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    history: list[float]
    n_iter: int
    init: np.ndarray


def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    std = x.std(axis=0)
    out = np.zeros_like(x)
    live = std > 0
    out[:, live] = (x[:, live] - x[:, live].mean(axis=0)) / std[live]
    return out


def kmeans_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` rows with pairwise distinct values, chosen k-means++ style.

    The first row is uniform among distinct rows, each further row is drawn
    with probability proportional to its squared distance to the chosen ones.
    """
    _, first_idx = np.unique(x, axis=0, return_index=True)
    distinct = np.sort(first_idx)
    if len(distinct) < k:
        raise MiningError(f"only {len(distinct)} distinct rows for k={k}")
    chosen = [int(distinct[rng.integers(len(distinct))])]
    for _ in range(1, k):
        d2 = ((x[distinct][:, None, :] - x[chosen][None, :, :]) ** 2).sum(axis=2).min(axis=1)
        p = d2 / d2.sum()
        chosen.append(int(distinct[rng.choice(len(distinct), p=p)]))
    return np.array(chosen)


def lloyd(x: np.ndarray, centers: np.ndarray, max_iter: int = DEFAULT_MAX_ITER):
    """Lloyd iterations from given centers; empty clusters keep their center."""
    centers = np.array(centers, dtype=float)
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(x)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(len(centers)):
            members = x[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    objective = float(d2[np.arange(len(x)), labels].sum())
    return labels, centers, objective, history, it


def kmeans(x, k: int, seed: int = DEFAULT_SEED, n_init: int = DEFAULT_N_INIT,
           max_iter: int = DEFAULT_MAX_ITER) -> KMeansResult:
    """Best of ``n_init`` seeded k-means runs (lowest objective, earliest on ties)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if k < 2:
        raise MiningError("k must be at least 2")
    if len(x) < k:
        raise MiningError(f"{len(x)} rows cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        init = kmeans_init(x, k, rng)
        labels, centers, obj, hist, it = lloyd(x, x[init], max_iter)
        if best is None or obj < best.objective:
            best = KMeansResult(labels, centers, obj, hist, it, init)
    return best


def order_by_total(labels, totals, k) -> np.ndarray:
    """Rank of each raw cluster by mean total intrusion (0 = lowest)."""
    means = []
    for c in range(k):
        sel = totals[labels == c]
        means.append(sel.mean() if len(sel) else np.inf)
    order = sorted(range(k), key=lambda c: (means[c], c))
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    return rank


def kmeans_classes(table: MiningTable, columns=None, k: int = 3, seed: int = DEFAULT_SEED,
                   n_init: int = DEFAULT_N_INIT, max_iter: int = DEFAULT_MAX_ITER):
    """Cluster the chosen result columns and attach class labels.

    Clustering runs on z-scored columns. Classes are named by ascending mean
    total (raw) intrusion of their members: the lowest is ``good``.
    Returns the labelled table and the :class:`KMeansResult`.
    """
    columns = list(columns) if columns else list(table.result_names)
    unknown = [c for c in columns if c not in table.result_names]
    if unknown:
        raise MiningError(f"unknown result columns {unknown}")
    raw = np.column_stack([table.result(c) for c in columns]) if table.n_rows else np.empty((0, 0))
    res = kmeans(zscore(raw), k, seed, n_init, max_iter)
    rank = order_by_total(res.labels, raw.sum(axis=1), k)
    names = class_names(k)
    classes = [names[rank[c]] for c in res.labels]
    return table.with_classes(classes, names), res
