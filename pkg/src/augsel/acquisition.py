"""Per-sample acquisition scores and batch selection over a scored pool."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from augsel.errors import DomainError

SELECT_MAX = "select_max"
SELECT_MIN = "select_min"

STRATEGIES = ("random", "entropy", "margin", "coreset", "neighbour-margin")
SCORED_STRATEGIES = ("entropy", "margin", "neighbour-margin")

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class AcquisitionScore:
    """One pool sample's score.

    ``finite`` is False only for neighbour-margin samples whose top-two
    classes are not ordinal neighbours; ``value`` is then ``math.inf`` and
    ``fallback`` carries the plain top-two margin used to rank such samples
    when the finite ones run out.
    """

    value: float
    direction: str = SELECT_MIN
    finite: bool = True
    fallback: float | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value if self.finite else None,
            "finite": self.finite,
            "fallback": self.fallback,
        }


@dataclass
class SelectionOutcome:
    chosen_ids: list[int] = field(default_factory=list)
    scores_at_selection: list = field(default_factory=list)
    used_fallback: bool = False

    def __len__(self) -> int:
        return len(self.chosen_ids)


def canonical_strategy(name: str) -> str:
    """Map a strategy string to its canonical form (``neighbour_margin`` is accepted)."""
    key = name.strip().lower().replace("_", "-")
    if key not in STRATEGIES:
        raise DomainError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")
    return key


def _check_rows(p: np.ndarray) -> None:
    if p.ndim != 2 or p.shape[1] < 2:
        raise DomainError(f"probability rows need K >= 2 columns, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        bad = int(np.argwhere(~np.all(np.isfinite(p), axis=1))[0, 0])
        raise DomainError(f"row {bad}: non-finite probability")
    neg = np.any(p < 0, axis=1)
    if neg.any():
        raise DomainError(f"row {int(np.argmax(neg))}: negative probability")
    off = np.abs(p.sum(axis=1) - 1.0) > ROW_SUM_TOL
    if off.any():
        bad = int(np.argmax(off))
        raise DomainError(f"row {bad}: probabilities sum to {p[bad].sum()!r}, not 1")


def _as_vector(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DomainError("expected a single probability vector")
    return p


def top_two(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best and second-best class per row; ties go to the lowest class index."""
    # stable sort on -p keeps equal probabilities in ascending class order
    order = np.argsort(-p, axis=1, kind="stable")
    return order[:, 0], order[:, 1]


def entropy_values(p: np.ndarray) -> np.ndarray:
    _check_rows(p)
    # 0 * ln 0 = 0: zero entries contribute nothing
    logs = np.log(np.where(p > 0, p, 1.0))
    return -np.sum(p * logs, axis=1)


def margin_values(p: np.ndarray) -> np.ndarray:
    _check_rows(p)
    rows = np.arange(p.shape[0])
    first, second = top_two(p)
    return p[rows, first] - p[rows, second]


def neighbour_margin_values(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (margins, finite mask); non-adjacent top-two rows are excluded."""
    margins = margin_values(p)
    first, second = top_two(p)
    return margins, np.abs(first - second) == 1


def entropy_score(p) -> AcquisitionScore:
    value = float(entropy_values(_as_vector(p)[None, :])[0])
    return AcquisitionScore(value, SELECT_MAX)


def margin_score(p) -> AcquisitionScore:
    return AcquisitionScore(float(margin_values(_as_vector(p)[None, :])[0]), SELECT_MIN)


def neighbour_margin_score(p) -> AcquisitionScore:
    margins, finite = neighbour_margin_values(_as_vector(p)[None, :])
    return _nm_score(float(margins[0]), bool(finite[0]))


def _nm_score(margin: float, finite: bool) -> AcquisitionScore:
    if finite:
        return AcquisitionScore(margin, SELECT_MIN)
    return AcquisitionScore(math.inf, SELECT_MIN, finite=False, fallback=margin)


def score_pool(probs, strategy: str) -> list[AcquisitionScore]:
    strategy = canonical_strategy(strategy)
    if strategy not in SCORED_STRATEGIES:
        raise DomainError(f"strategy {strategy!r} does not score probabilities")
    p = np.asarray(probs, dtype=np.float64)
    if p.size == 0:
        return []
    if strategy == "entropy":
        return [AcquisitionScore(float(v), SELECT_MAX) for v in entropy_values(p)]
    if strategy == "margin":
        return [AcquisitionScore(float(v), SELECT_MIN) for v in margin_values(p)]
    margins, finite = neighbour_margin_values(p)
    return [_nm_score(float(m), bool(f)) for m, f in zip(margins, finite)]


def select_batch(scores: list[AcquisitionScore], budget: int) -> SelectionOutcome:
    """Pick up to ``budget`` pool indices in score order, ties to the lowest index.

    Infinite (excluded) scores are taken only after every finite score, and
    among themselves are ordered by their plain-margin fallback.
    """
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")
    if not scores:
        return SelectionOutcome()
    directions = {s.direction for s in scores}
    if len(directions) != 1:
        raise DomainError(f"scores mix selection directions: {sorted(directions)}")
    sign = -1.0 if directions.pop() == SELECT_MAX else 1.0

    n = len(scores)
    finite = np.array([s.finite for s in scores])
    key = np.array([sign * s.value if s.finite else sign * s.fallback for s in scores])
    index = np.arange(n)
    # lexsort: last key is primary -> excluded flag, then score, then index
    order = np.lexsort((index, key, ~finite))[:budget]
    return SelectionOutcome(
        chosen_ids=[int(i) for i in order],
        scores_at_selection=[scores[i] for i in order],
        used_fallback=bool(np.any(~finite[order])),
    )


def random_select(pool_size: int, budget: int, seed) -> SelectionOutcome:
    """Uniform draw of ``min(budget, pool_size)`` indices without replacement."""
    if budget < 0:
        raise DomainError(f"budget must be >= 0, got {budget}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    k = min(budget, pool_size)
    if k == 0:
        return SelectionOutcome()
    chosen = rng.choice(pool_size, size=k, replace=False)
    return SelectionOutcome(chosen_ids=[int(i) for i in chosen], scores_at_selection=[None] * k)
