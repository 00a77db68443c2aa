"""Chi-squared ranking of part attributes against the crash class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._num import fmt_real
from ..errors import MiningError
from .table import MiningTable


@dataclass(frozen=True)
class AttributeRanking:
    items: list[tuple[str, float]]
    bins: int

    def names(self):
        return [n for n, _ in self.items]

    def to_text(self) -> str:
        lines = ["rank\tattribute\tchi2"]
        for i, (name, score) in enumerate(self.items, start=1):
            lines.append(f"{i}\t{name}\t{fmt_real(score)}")
        return "\n".join(lines) + "\n"


def equal_frequency_cuts(values, bins: int) -> np.ndarray:
    """Cut points splitting sorted values into ``bins`` groups of equal count.

    A value equal to a cut falls in the upper bin; repeated cuts collapse, and
    a cut at the minimum is dropped since it would leave an empty first bin.
    """
    v = np.sort(np.asarray(values, dtype=float))
    n = len(v)
    if bins < 1:
        raise ValueError("bins must be positive")
    cuts = {v[(b * n) // bins] for b in range(1, bins) if 0 < (b * n) // bins < n}
    return np.array(sorted(c for c in cuts if n and c > v[0]))


def discretize(values, bins: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.searchsorted(equal_frequency_cuts(values, bins), values, side="right")


def contingency(bin_index, classes, class_labels) -> np.ndarray:
    col = {c: j for j, c in enumerate(class_labels)}
    nb = int(max(bin_index)) + 1 if len(bin_index) else 0
    table = np.zeros((nb, len(class_labels)))
    for b, c in zip(bin_index, classes):
        table[int(b), col[c]] += 1
    return table


def chi_squared(observed) -> float:
    """Pearson statistic over a contingency table; cells with zero expectation skipped."""
    o = np.asarray(observed, dtype=float)
    total = o.sum()
    if total == 0:
        return 0.0
    e = np.outer(o.sum(axis=1), o.sum(axis=0)) / total
    live = e > 0
    return float((((o - e) ** 2)[live] / e[live]).sum())


def chi_squared_rank(table: MiningTable, class_column: str = "class", bins: int = 10
                     ) -> AttributeRanking:
    """Score every part attribute, highest first (ties by name)."""
    if class_column != "class" or table.classes is None:
        raise MiningError("table has no class column")
    labels = [c for c in table.class_labels if c in set(table.classes)]
    if len(labels) < 2:
        raise MiningError("chi-squared ranking needs at least two classes present")
    scores = []
    for name in table.attributes:
        obs = contingency(discretize(table.attribute(name), bins), table.classes, labels)
        scores.append((name, chi_squared(obs)))
    scores.sort(key=lambda t: (-t[1], t[0]))
    return AttributeRanking(scores, bins)
