"""Independent reference implementations used as test oracles.

They are written for clarity, in plain Python, and share no code with the
package.
"""

from __future__ import annotations

import itertools
import math


def canonical(labels):
    """Relabel so labels are numbered by first appearance."""
    seen = {}
    return [seen.setdefault(l, len(seen)) for l in labels]


def cluster(points, linkage, k=None, height=None):
    """Exhaustive agglomeration: recompute every cluster distance from raw points.

    Ties (within 1e-12 relative) go to the pair with the lexicographically
    smallest (min row of one cluster, min row of the other).
    """
    pts = [tuple(map(float, p)) for p in points]
    clusters = [[i] for i in range(len(pts))]

    def dist(a, b):
        ds = [math.dist(pts[i], pts[j]) for i in a for j in b]
        if linkage == "single":
            return min(ds)
        if linkage == "complete":
            return max(ds)
        return sum(ds) / len(ds)

    while len(clusters) > 1:
        if k is not None and len(clusters) <= k:
            break
        cands = []
        for a, b in itertools.combinations(range(len(clusters)), 2):
            cands.append((dist(clusters[a], clusters[b]), min(clusters[a]), min(clusters[b]), a, b))
        best = min(c[0] for c in cands)
        if height is not None and best > height:
            break
        tied = [c for c in cands if c[0] <= best + 1e-12 * max(1.0, abs(best))]
        _, _, _, a, b = min(tied, key=lambda c: (min(c[1], c[2]), max(c[1], c[2])))
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    labels = [0] * len(pts)
    for c, members in enumerate(clusters):
        for i in members:
            labels[i] = c
    return canonical(labels)


def chi2(binned, classes):
    """Pearson chi-squared of a bin-by-class contingency table, straight from the formula."""
    cells = {}
    for b, c in zip(binned, classes):
        cells[(b, c)] = cells.get((b, c), 0) + 1
    rows = sorted(set(binned))
    cols = sorted(set(classes))
    n = len(classes)
    total = 0.0
    for r in rows:
        for c in cols:
            row_sum = sum(cells.get((r, k), 0) for k in cols)
            col_sum = sum(cells.get((k, c), 0) for k in rows)
            e = row_sum * col_sum / n
            total += (cells.get((r, c), 0) - e) ** 2 / e
    return total


def lloyd(points, centers):
    """Plain-Python Lloyd iterations to convergence; returns the labels."""
    pts = [list(map(float, p)) for p in points]
    cs = [list(map(float, c)) for c in centers]
    labels = None
    while True:
        new = []
        for p in pts:
            d = [sum((a - b) ** 2 for a, b in zip(p, c)) for c in cs]
            new.append(d.index(min(d)))
        if new == labels:
            return labels
        labels = new
        for j in range(len(cs)):
            members = [p for p, l in zip(pts, labels) if l == j]
            if members:
                cs[j] = [sum(col) / len(members) for col in zip(*members)]


def cross(u, v):
    return (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def norm(v):
    return math.sqrt(sum(x * x for x in v))


def quad_area_normal(a, b, c, d):
    """Half the norm of the diagonal cross product, and the normalized
    cross product of the normalized diagonals."""
    u, v = sub(c, a), sub(d, b)
    area = 0.5 * norm(cross(u, v))
    nu, nv = norm(u), norm(v)
    n = cross(tuple(x / nu for x in u), tuple(x / nv for x in v))
    ln = norm(n)
    return area, tuple(x / ln for x in n)
