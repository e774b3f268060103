"""Independent reference implementations used only by the tests.

These are written as plain loops so they share no code path with the
vectorised library versions they check.
"""

import itertools
import math
from collections import Counter


def qwk_double_sum(counts):
    k = len(counts)
    n = sum(sum(row) for row in counts)
    rows = [sum(counts[i]) for i in range(k)]
    cols = [sum(counts[i][j] for i in range(k)) for j in range(k)]
    num = den = 0.0
    for i in range(k):
        for j in range(k):
            w = (i - j) ** 2 / (k - 1) ** 2
            num += w * counts[i][j]
            den += w * rows[i] * cols[j] / n
    if den == 0:
        return 1.0 if num == 0 else 0.0
    return 1.0 - num / den


def per_class_report(counts):
    """accuracy, macro precision, macro recall, macro f1 by explicit per-class loops."""
    k = len(counts)
    n = sum(sum(row) for row in counts)
    precisions, recalls, f1s = [], [], []
    for c in range(k):
        tp = counts[c][c]
        fp = sum(counts[i][c] for i in range(k) if i != c)
        fn = sum(counts[c][j] for j in range(k) if j != c)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        precisions.append(p)
        recalls.append(r)
        f1s.append(2 * p * r / (p + r) if p + r else 0.0)
    acc = sum(counts[c][c] for c in range(k)) / n
    return acc, sum(precisions) / k, sum(recalls) / k, sum(f1s) / k


def count_pairs(y_true, y_pred, k):
    tally = Counter(zip(y_true, y_pred))
    return [[tally.get((i, j), 0) for j in range(k)] for i in range(k)]


def fid_1d(mu_a, sd_a, mu_b, sd_b):
    return (mu_a - mu_b) ** 2 + (sd_a - sd_b) ** 2


def spearman(xs, ys):
    """Spearman rank correlation with average ranks for ties."""

    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        out = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for t in range(i, j + 1):
                out[order[t]] = (i + j) / 2 + 1
            i = j + 1
        return out

    rx, ry = ranks(xs), ranks(ys)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    sx = math.sqrt(sum((a - mx) ** 2 for a in rx))
    sy = math.sqrt(sum((b - my) ** 2 for b in ry))
    return cov / (sx * sy)


def kcenter_optimum(points, k):
    """Exact k-center radius (squared distance) by trying every center subset."""

    def d2(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    best = math.inf
    for centers in itertools.combinations(range(len(points)), k):
        radius = max(min(d2(p, points[c]) for c in centers) for p in points)
        best = min(best, radius)
    return best
