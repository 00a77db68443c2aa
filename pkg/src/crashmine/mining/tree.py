"""Gain-ratio decision trees on numeric attributes with pessimistic pruning.

Induction follows C4.5 for continuous attributes: binary splits ``a <= t``
with ``t`` the midpoint between consecutive distinct values, chosen by the
largest gain ratio among splits with positive information gain and at least
``min_instances`` rows per side. After growing, subtrees are replaced by
leaves whenever the leaf's upper-confidence error estimate does not exceed
the subtree's (plus 0.1, as C4.5 does).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .._num import fmt_real
from ..errors import MiningError
from .table import MiningTable

GAIN_EPS = 1e-12


@dataclass
class TreeNode:
    counts: dict[str, int]
    label: str
    attribute: str | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    gain_ratio: float | None = None

    @property
    def is_leaf(self):
        return self.attribute is None

    @property
    def n(self):
        return sum(self.counts.values())

    @property
    def errors(self):
        return self.n - self.counts.get(self.label, 0)

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def size(self):
        return 1 if self.is_leaf else 1 + self.left.size() + self.right.size()


@dataclass
class DecisionTree:
    root: TreeNode
    attributes: list[str]
    class_labels: tuple[str, ...]
    confidence: float
    min_instances: int
    pruned_subtrees: int = 0
    unpruned: TreeNode | None = field(default=None, repr=False)

    def classify(self, row) -> str:
        """Label for ``row``, a mapping from attribute name to value."""
        node = self.root
        while not node.is_leaf:
            try:
                v = row[node.attribute]
            except (KeyError, IndexError):
                raise MiningError(f"row lacks attribute {node.attribute!r}") from None
            node = node.left if v <= node.threshold else node.right
        return node.label

    def size(self):
        return self.root.size()

    def n_leaves(self):
        return len(self.root.leaves())

    def tested_attributes(self):
        out = []

        def walk(node):
            if not node.is_leaf:
                out.append(node.attribute)
                walk(node.left)
                walk(node.right)
        walk(self.root)
        return out

    def to_text(self) -> str:
        lines = []

        def leaf(node):
            return f"{node.label} ({node.n}/{node.errors})"

        def walk(node, depth):
            pad = "|   " * depth
            if node.is_leaf:
                lines.append(pad + leaf(node))
                return
            t = fmt_real(node.threshold)
            lines.append(f"{pad}{node.attribute} <= {t}")
            walk(node.left, depth + 1)
            lines.append(f"{pad}{node.attribute} > {t}")
            walk(node.right, depth + 1)

        walk(self.root, 0)
        return "\n".join(lines) + "\n"

    def to_dot(self) -> str:
        lines = ["digraph tree {", '  node [fontname="Helvetica"];']
        counter = [0]

        def walk(node):
            me = f"n{counter[0]}"
            counter[0] += 1
            if node.is_leaf:
                lines.append(f'  {me} [shape=box, label="{node.label} ({node.n}/{node.errors})"];')
                return me
            lines.append(f'  {me} [shape=ellipse, label="{node.attribute}"];')
            t = fmt_real(node.threshold)
            a = walk(node.left)
            lines.append(f'  {me} -> {a} [label="<= {t}"];')
            b = walk(node.right)
            lines.append(f'  {me} -> {b} [label="> {t}"];')
            return me

        walk(self.root)
        lines.append("}")
        return "\n".join(lines) + "\n"


def entropy(counts) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log2(p)
    return h


def split_scores(class_counts_left, class_counts_right):
    """(information gain, split information, gain ratio) of a binary split."""
    nl, nr = sum(class_counts_left), sum(class_counts_right)
    n = nl + nr
    parent = [a + b for a, b in zip(class_counts_left, class_counts_right)]
    gain = entropy(parent) - (nl / n) * entropy(class_counts_left) - (nr / n) * entropy(
        class_counts_right)
    split_info = entropy([nl, nr])
    ratio = gain / split_info if split_info > 0 else 0.0
    return gain, split_info, ratio


def added_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors at the upper confidence bound of the binomial error rate.

    Pessimistic estimate used for pruning: with ``e`` errors among ``n``
    cases the leaf is charged ``e + added_errors(n, e, cf)`` errors.
    """
    if n <= 0:
        return 0.0
    if e < 1:
        base = n * (1 - confidence ** (1 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1.0, confidence) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - confidence)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (
        1 + z * z / n)
    return r * n - e


def _majority(counts, labels):
    best = max(counts.get(c, 0) for c in labels)
    return next(c for c in labels if counts.get(c, 0) == best)


def _best_split(x, y_idx, n_classes, min_instances):
    best = None  # (ratio, col, threshold)
    n = len(y_idx)
    for col in range(x.shape[1]):
        order = np.argsort(x[:, col], kind="stable")
        xs, ys = x[order, col], y_idx[order]
        left = np.zeros(n_classes, dtype=int)
        right = np.bincount(ys, minlength=n_classes)
        for i in range(n - 1):
            left[ys[i]] += 1
            right[ys[i]] -= 1
            if xs[i] == xs[i + 1]:
                continue
            nl = i + 1
            if nl < min_instances or n - nl < min_instances:
                continue
            gain, _, ratio = split_scores(left.tolist(), right.tolist())
            if gain <= GAIN_EPS:
                continue
            if best is None or ratio > best[0] + 1e-12:
                best = (ratio, col, (xs[i] + xs[i + 1]) / 2.0)
    return best


def _grow(x, y_idx, labels, attributes, min_instances):
    counts = Counter(labels[i] for i in y_idx)
    counts = {c: counts.get(c, 0) for c in labels}
    node = TreeNode(counts, _majority(counts, labels))
    if len(y_idx) < 2 * min_instances or sum(1 for v in counts.values() if v) <= 1:
        return node
    best = _best_split(x, y_idx, len(labels), min_instances)
    if best is None:
        return node
    ratio, col, thr = best
    mask = x[:, col] <= thr
    node.attribute = attributes[col]
    node.threshold = float(thr)
    node.gain_ratio = float(ratio)
    node.left = _grow(x[mask], y_idx[mask], labels, attributes, min_instances)
    node.right = _grow(x[~mask], y_idx[~mask], labels, attributes, min_instances)
    return node


def _copy(node):
    if node.is_leaf:
        return TreeNode(dict(node.counts), node.label)
    return TreeNode(dict(node.counts), node.label, node.attribute, node.threshold,
                    _copy(node.left), _copy(node.right), node.gain_ratio)


def estimated_errors(node, confidence) -> float:
    if node.is_leaf:
        return node.errors + added_errors(node.n, node.errors, confidence)
    return estimated_errors(node.left, confidence) + estimated_errors(node.right, confidence)


def prune(node, confidence):
    """Bottom-up subtree replacement; returns the number of subtrees collapsed."""
    if node.is_leaf:
        return 0
    collapsed = prune(node.left, confidence) + prune(node.right, confidence)
    as_leaf = node.errors + added_errors(node.n, node.errors, confidence)
    if as_leaf <= estimated_errors(node, confidence) + 0.1:
        node.attribute = node.threshold = node.left = node.right = node.gain_ratio = None
        collapsed += 1
    return collapsed


def build_tree(table: MiningTable, class_column: str = "class", confidence: float = 0.25,
               min_instances: int = 2, attributes=None) -> DecisionTree:
    """Induce and prune a tree predicting the table's class from part attributes."""
    if table.classes is None or class_column != "class":
        raise MiningError("table has no class column")
    if not 0 < confidence < 1:
        raise MiningError("confidence must lie in (0, 1)")
    if min_instances < 1:
        raise MiningError("min_instances must be >= 1")
    attributes = list(attributes) if attributes is not None else list(table.attributes)
    present = set(table.classes)
    labels = tuple(c for c in table.class_labels if c in present) or tuple(sorted(present))
    if len(present) >= 2 and table.n_rows < 2 * min_instances:
        raise MiningError(f"need at least {2 * min_instances} rows, got {table.n_rows}")
    x = (np.column_stack([table.attribute(a) for a in attributes]) if attributes
         else np.empty((table.n_rows, 0)))
    y_idx = np.array([labels.index(c) for c in table.classes], dtype=int)
    grown = _grow(x, y_idx, labels, attributes, min_instances)
    root = _copy(grown)
    collapsed = prune(root, confidence)
    return DecisionTree(root, attributes, labels, confidence, min_instances, collapsed, grown)
