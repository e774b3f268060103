"""Class-specific Gaussian generators with a truncation knob, plus a
synthetic ordinal benchmark.

A generator draws ``mean + psi * L z`` with ``L L^T`` the fitted class
covariance: psi = 0 returns the class mean every time, psi = 1 matches the
training spread and psi > 1 widens it.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from augsel.embedio import DatasetSplit, EmbeddingSet, LabelVector, PoolTags
from augsel.errors import DomainError

GEN_RIDGE = 1e-6
DEFAULT_TRUNCATIONS = (0.5, 1.2, 2.0)
LIMUC_PROPORTIONS = (0.5414, 0.2707, 0.1112, 0.0767)


def rng_for(seed: int, *stream) -> np.random.Generator:
    """Independent generator for a named sub-stream of a master seed.

    Stream parts may be ints or strings; strings are hashed with crc32 so the
    derivation is stable across processes.
    """
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in stream:
        words.append(zlib.crc32(part.encode()) if isinstance(part, str) else int(part))
    return np.random.default_rng(np.random.SeedSequence(words))


@dataclass
class ClassGenerator:
    class_id: int
    mean: np.ndarray
    chol: np.ndarray
    source_count: int

    @property
    def cov(self) -> np.ndarray:
        return self.chol @ self.chol.T


@dataclass(frozen=True)
class PoolSpec:
    truncations: tuple[float, ...] = DEFAULT_TRUNCATIONS
    per_class_per_truncation: int = 100
    seed: int = 0

    def __post_init__(self):
        if any(psi < 0 for psi in self.truncations):
            raise DomainError("truncation values must be >= 0")
        if self.per_class_per_truncation < 0:
            raise DomainError("per_class_per_truncation must be >= 0")


def fit_generators(x: EmbeddingSet, y: LabelVector, ridge: float = GEN_RIDGE) -> list[ClassGenerator]:
    gens = []
    for c in range(y.class_count):
        rows = x.values[y.labels == c]
        if rows.shape[0] < 2:
            raise DomainError(f"class {c} has {rows.shape[0]} samples; need at least 2")
        mean = rows.mean(axis=0)
        centered = rows - mean
        cov = centered.T @ centered / (rows.shape[0] - 1)
        cov = 0.5 * (cov + cov.T) + ridge * np.eye(x.dim)
        gens.append(ClassGenerator(c, mean, np.linalg.cholesky(cov), rows.shape[0]))
    return gens


def generate(gen: ClassGenerator, psi: float, count: int, seed) -> EmbeddingSet:
    if psi < 0:
        raise DomainError(f"psi must be >= 0, got {psi}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = rng.standard_normal((count, gen.mean.shape[0]))
    return EmbeddingSet(gen.mean + psi * (z @ gen.chol.T))


def build_pool(
    gens: list[ClassGenerator], spec: PoolSpec
) -> tuple[EmbeddingSet, LabelVector, PoolTags]:
    """Class-major, then truncation, then sample order; one seed stream per (class, psi)."""
    dim = gens[0].mean.shape[0] if gens else 1
    class_count = max(2, len(gens))
    blocks, labels, classes, psis = [], [], [], []
    for gen in gens:
        for t_index, psi in enumerate(spec.truncations):
            rng = rng_for(spec.seed, "pool", gen.class_id, t_index)
            block = generate(gen, psi, spec.per_class_per_truncation, rng)
            blocks.append(block.values)
            labels.append(np.full(block.count, gen.class_id))
            classes.append(np.full(block.count, gen.class_id))
            psis.append(np.full(block.count, float(psi)))
    if not blocks:
        return EmbeddingSet.empty(dim), LabelVector(np.zeros(0, np.int64), class_count), PoolTags([], [])
    return (
        EmbeddingSet(np.concatenate(blocks)),
        LabelVector(np.concatenate(labels), class_count),
        PoolTags(np.concatenate(classes), np.concatenate(psis)),
    )


@dataclass(frozen=True)
class BenchmarkSpec:
    """Ordinal Gaussian classes with means ``c * spacing`` along axis 0.

    ``train_size`` samples follow ``proportions``; the test set is balanced.
    ``base_per_class`` marks a balanced train subset as the small labeled set
    the active loop starts from. Generators are fitted on the whole train
    partition (``generator_source="train"``) or on that base subset only
    (``"base"``).
    """

    class_count: int = 4
    dim: int = 8
    spacing: float = 1.0
    class_spread: float = 0.9
    proportions: tuple[float, ...] = LIMUC_PROPORTIONS
    train_size: int = 8000
    test_per_class: int = 500
    base_per_class: int = 50
    pool: PoolSpec = field(default_factory=PoolSpec)
    generator_source: str = "train"
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 2 or self.dim < 1:
            raise DomainError("need class_count >= 2 and dim >= 1")
        if len(self.proportions) != self.class_count:
            raise DomainError(f"{len(self.proportions)} proportions for {self.class_count} classes")
        if any(p < 0 for p in self.proportions) or abs(sum(self.proportions) - 1.0) > 1e-9:
            raise DomainError(f"proportions must be non-negative and sum to 1, got {self.proportions}")
        if min(self.train_size, self.test_per_class, self.base_per_class) < 0 or self.class_spread < 0:
            raise DomainError("sizes and spread must be non-negative")
        if self.generator_source not in ("train", "base"):
            raise DomainError(f"generator_source must be 'train' or 'base', got {self.generator_source!r}")

    def class_means(self) -> np.ndarray:
        means = np.zeros((self.class_count, self.dim))
        means[:, 0] = self.spacing * np.arange(self.class_count)
        return means


def proportional_counts(total: int, proportions) -> np.ndarray:
    """Largest-remainder rounding of ``total * proportions`` (ties to lower class)."""
    raw = total * np.asarray(proportions, dtype=np.float64)
    counts = np.floor(raw).astype(np.int64)
    short = total - counts.sum()
    order = np.lexsort((np.arange(raw.size), -(raw - counts)))
    counts[order[:short]] += 1
    return counts


def _draw(spec: BenchmarkSpec, counts, rng) -> tuple[np.ndarray, np.ndarray]:
    means = spec.class_means()
    labels = np.repeat(np.arange(spec.class_count), counts)
    noise = rng.standard_normal((labels.size, spec.dim))
    return means[labels] + spec.class_spread * noise, labels


def make_benchmark(spec: BenchmarkSpec) -> DatasetSplit:
    from augsel.pipeline import stratified_subset_ids

    k = spec.class_count
    train_counts = proportional_counts(spec.train_size, spec.proportions)
    train_v, train_l = _draw(spec, train_counts, rng_for(spec.seed, "bench", "train"))
    test_v, test_l = _draw(spec, np.full(k, spec.test_per_class), rng_for(spec.seed, "bench", "test"))

    n_train, n_test = train_l.size, test_l.size
    train_x = EmbeddingSet(train_v, np.arange(n_train))
    train_y = LabelVector(train_l, k)
    base_ids = stratified_subset_ids(train_y, spec.base_per_class, rng_for(spec.seed, "bench", "base"))
    if spec.generator_source == "base":
        gens = fit_generators(train_x.take(base_ids), train_y.take(base_ids))
    else:
        gens = fit_generators(train_x, train_y)
    pool_spec = PoolSpec(spec.pool.truncations, spec.pool.per_class_per_truncation, spec.seed)
    pool_x, pool_y, tags = build_pool(gens, pool_spec)
    pool_x.ids = n_train + n_test + np.arange(pool_x.count)

    return DatasetSplit(
        train_x=train_x,
        train_y=train_y,
        test_x=EmbeddingSet(test_v, n_train + np.arange(n_test)),
        test_y=LabelVector(test_l, k),
        pool_x=pool_x,
        pool_y=pool_y,
        pool_tags=tags,
        base_ids=base_ids,
    )
