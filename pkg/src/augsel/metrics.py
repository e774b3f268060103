"""Classification metrics, quadratic weighted kappa and Frechet distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from augsel.embedio import EmbeddingSet, LabelVector
from augsel.errors import DomainError
from augsel.linalg import sym_eig, sym_sqrt

COV_RIDGE = 1e-6
METRIC_KEYS = ("qwk", "accuracy", "f1_macro", "precision_macro", "recall_macro")


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows: true class, columns: predicted class

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def class_count(self) -> int:
        return self.counts.shape[0]


@dataclass
class MetricsBundle:
    qwk: float
    accuracy: float
    f1_macro: float
    precision_macro: float
    recall_macro: float
    qwk_degenerate: bool = False

    def to_dict(self) -> dict:
        return {k: round(float(getattr(self, k)), 6) for k in METRIC_KEYS}

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in METRIC_KEYS])


def _labels(y) -> np.ndarray:
    return y.labels if isinstance(y, LabelVector) else np.asarray(y, dtype=np.int64).reshape(-1)


def confusion(y_true, y_pred, class_count: int = 4) -> ConfusionMatrix:
    t, p = _labels(y_true), _labels(y_pred)
    if t.shape != p.shape:
        raise DomainError(f"length mismatch: {t.shape[0]} true vs {p.shape[0]} predicted")
    for arr in (t, p):
        if arr.size and (arr.min() < 0 or arr.max() >= class_count):
            raise DomainError(f"label outside 0..{class_count - 1}")
    counts = np.bincount(t * class_count + p, minlength=class_count**2)
    return ConfusionMatrix(counts.reshape(class_count, class_count).astype(np.int64))


def _as_counts(cm) -> np.ndarray:
    counts = cm.counts if isinstance(cm, ConfusionMatrix) else np.asarray(cm)
    counts = counts.astype(np.float64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
        raise DomainError(f"confusion matrix must be KxK with K >= 2, got {counts.shape}")
    if counts.sum() <= 0:
        raise DomainError("confusion matrix is empty")
    return counts


def qwk_with_flag(cm) -> tuple[float, bool]:
    """Quadratic weighted kappa and whether the degenerate 0/0 rule fired."""
    observed = _as_counts(cm)
    k = observed.shape[0]
    n = observed.sum()
    idx = np.arange(k)
    weights = (idx[:, None] - idx[None, :]) ** 2 / (k - 1) ** 2
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
    num = float(np.sum(weights * observed))
    den = float(np.sum(weights * expected))
    if den == 0.0:
        return (1.0 if num == 0.0 else 0.0), True
    return 1.0 - num / den, False


def qwk(cm) -> float:
    return qwk_with_flag(cm)[0]


def classification_report(cm) -> MetricsBundle:
    counts = _as_counts(cm)
    tp = np.diag(counts)
    pred_tot = counts.sum(axis=0)
    true_tot = counts.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        recall = np.where(true_tot > 0, tp / true_tot, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / pr, 0.0)
    kappa, degenerate = qwk_with_flag(counts)
    return MetricsBundle(
        qwk=kappa,
        accuracy=float(tp.sum() / counts.sum()),
        f1_macro=float(f1.mean()),
        precision_macro=float(precision.mean()),
        recall_macro=float(recall.mean()),
        qwk_degenerate=degenerate,
    )


def evaluate(y_true, y_pred, class_count: int = 4) -> MetricsBundle:
    return classification_report(confusion(y_true, y_pred, class_count))


# ---------------------------------------------------------------- FID


@dataclass
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    n: int = 0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(x, ridge: float = COV_RIDGE) -> GaussianSummary:
    """Sample mean and unbiased covariance plus ``ridge * I``."""
    values = x.values if isinstance(x, EmbeddingSet) else np.asarray(x, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if n < 2:
        raise DomainError(f"need at least 2 samples to fit a Gaussian, got {n}")
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (n - 1)
    cov = 0.5 * (cov + cov.T) + ridge * np.eye(values.shape[1])
    return GaussianSummary(mean, cov, n)


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Squared 2-Wasserstein distance between two Gaussians.

    Uses the symmetric product sqrt(A) B sqrt(A), whose square root has the
    same trace as sqrt(A B).
    """
    if a.dim != b.dim:
        raise DomainError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    root_a = sym_sqrt(a.cov)
    inner = root_a @ b.cov @ root_a
    w, _ = sym_eig(0.5 * (inner + inner.T))
    trace_term = np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sum(np.sqrt(np.clip(w, 0.0, None)))
    return max(0.0, float(diff @ diff + trace_term))


def fid(x, y) -> float:
    return frechet_distance(fit_gaussian(x), fit_gaussian(y))


def aggregate(bundles: list[MetricsBundle]) -> tuple[dict, dict]:
    """Mean and population std of each metric over a list of bundles."""
    arr = np.array([b.as_array() for b in bundles])
    mean, std = arr.mean(axis=0), arr.std(axis=0)
    return dict(zip(METRIC_KEYS, mean.tolist())), dict(zip(METRIC_KEYS, std.tolist()))

