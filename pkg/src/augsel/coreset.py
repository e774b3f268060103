"""Greedy k-center (farthest-first) selection.

Each pick is the pool point whose squared Euclidean distance to its nearest
covered point (labeled set plus earlier picks) is largest; ties resolve to
the lowest pool index.
"""

from __future__ import annotations

import numpy as np

from augsel.acquisition import SELECT_MAX, AcquisitionScore, SelectionOutcome
from augsel.embedio import EmbeddingSet
from augsel.errors import DomainError


def _matrix(x) -> np.ndarray:
    if isinstance(x, EmbeddingSet):
        return x.values
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(-1, 1) if x.ndim == 1 else x


def squared_distances(points: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = points - center[None, :]
    return np.einsum("ij,ij->i", diff, diff)


def pairwise_min_update(cache: np.ndarray, pool, new_center) -> np.ndarray:
    """Return ``min(cache, |pool - new_center|^2)`` element-wise."""
    pool = _matrix(pool)
    center = np.asarray(new_center, dtype=np.float64).reshape(-1)
    if center.shape[0] != pool.shape[1]:
        raise DomainError(f"center has dim {center.shape[0]}, pool has dim {pool.shape[1]}")
    cache = np.asarray(cache, dtype=np.float64)
    if cache.shape != (pool.shape[0],):
        raise DomainError("distance cache length differs from pool size")
    return np.minimum(cache, squared_distances(pool, center))


def initial_cache(labeled, pool) -> np.ndarray:
    """Squared distance from each pool point to its nearest labeled point (inf if none)."""
    labeled, pool = _matrix(labeled), _matrix(pool)
    cache = np.full(pool.shape[0], np.inf)
    for center in labeled:
        cache = np.minimum(cache, squared_distances(pool, center))
    return cache


def kcenter_greedy(labeled, pool, k: int) -> SelectionOutcome:
    labeled, pool = _matrix(labeled), _matrix(pool)
    if labeled.shape[0] and labeled.shape[1] != pool.shape[1]:
        raise DomainError(f"labeled dim {labeled.shape[1]} != pool dim {pool.shape[1]}")
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    k = min(k, pool.shape[0])
    out = SelectionOutcome()
    if k == 0:
        return out

    cache = initial_cache(labeled, pool)
    chosen = np.zeros(pool.shape[0], dtype=bool)
    for _ in range(k):
        masked = np.where(chosen, -np.inf, cache)
        # argmax returns the first maximum -> lowest index wins ties
        pick = int(np.argmax(masked))
        out.chosen_ids.append(pick)
        out.scores_at_selection.append(AcquisitionScore(float(cache[pick]), SELECT_MAX))
        chosen[pick] = True
        cache = pairwise_min_update(cache, pool, pool[pick])
    return out


def coverage_radius(points, centers) -> float:
    """Largest distance from any point to its nearest center (Euclidean)."""
    points, centers = _matrix(points), _matrix(centers)
    return float(np.sqrt(initial_cache(centers, points).max()))


def diversify_pool(pool, target_size: int) -> SelectionOutcome:
    """Shrink a pool to ``target_size`` mutually distant samples."""
    if target_size < 1:
        raise DomainError(f"target_size must be >= 1, got {target_size}")
    pool = _matrix(pool)
    return kcenter_greedy(np.zeros((0, pool.shape[1])), pool, target_size)
