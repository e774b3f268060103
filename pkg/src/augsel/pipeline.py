"""Experiment orchestration: stratified subsets, the augment/select/retrain
loop, saturation curves and multi-seed strategy comparisons."""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable

import numpy as np

from augsel import acquisition
from augsel.acquisition import AcquisitionScore, SelectionOutcome, canonical_strategy
from augsel.classifier import SoftmaxModel, TrainConfig, predict_labels, predict_proba, train
from augsel.coreset import diversify_pool, kcenter_greedy
from augsel.embedio import DatasetSplit, EmbeddingSet, LabelVector
from augsel.errors import DomainError
from augsel.metrics import METRIC_KEYS, MetricsBundle, aggregate, evaluate
from augsel.synthpool import BenchmarkSpec, make_benchmark, rng_for

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("strategy", "seed", "iteration", "train_size", "qwk", "acc", "f1", "precision", "recall")


# ---------------------------------------------------------------- subsets


def stratified_subset_ids(y: LabelVector, per_class: int, seed) -> np.ndarray:
    """Positions of ``per_class`` uniformly drawn samples from every class."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    picked = []
    for c in range(y.class_count):
        members = np.flatnonzero(y.labels == c)
        if members.size < per_class:
            raise DomainError(f"class {c} has {members.size} samples; {per_class} requested")
        picked.append(np.sort(rng.choice(members, size=per_class, replace=False)))
    return np.concatenate(picked).astype(np.int64)


def stratified_subset(x: EmbeddingSet, y: LabelVector, per_class: int, seed) -> tuple[EmbeddingSet, LabelVector]:
    ids = stratified_subset_ids(y, per_class, seed)
    return x.take(ids), y.take(ids)


# ---------------------------------------------------------------- active loop


@dataclass(frozen=True)
class LoopConfig:
    strategy: str = "neighbour-margin"
    budget: int = 10  # per class per iteration
    iterations: int = 5
    diversify_to: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    early_stop: tuple[int, float] | None = None  # (patience, min_delta) on test QWK
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "strategy", canonical_strategy(self.strategy))
        if self.budget < 1:
            raise DomainError(f"budget must be >= 1, got {self.budget}")
        if self.iterations < 1:
            raise DomainError(f"iterations must be >= 1, got {self.iterations}")
        if self.diversify_to is not None and self.diversify_to < 1:
            raise DomainError("diversify_to must be >= 1 when set")
        if self.early_stop is not None and self.early_stop[0] < 1:
            raise DomainError("early-stop patience must be >= 1")

    def echo(self) -> dict:
        """Configuration without the seed."""
        out = asdict(self)
        out.pop("seed")
        out["train"].pop("seed")
        if self.early_stop is not None:
            out["early_stop"] = {"patience": self.early_stop[0], "min_delta": self.early_stop[1]}
        return out


@dataclass
class Selection:
    pool_index: int
    sample_id: int
    label: int
    psi: float
    score: AcquisitionScore | None

    def to_dict(self) -> dict:
        return {
            "pool_index": self.pool_index,
            "id": self.sample_id,
            "class": self.label,
            "psi": self.psi,
            "score": None if self.score is None else self.score.to_dict(),
        }


@dataclass
class IterationRecord:
    iteration: int
    train_size: int
    strategy: str
    metrics: MetricsBundle
    selections: list[Selection] = field(default_factory=list)
    fallback_used: bool = False

    @property
    def selected_ids(self) -> list[int]:
        return [s.pool_index for s in self.selections]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "train_size": self.train_size,
            "strategy": self.strategy,
            "selected_ids": self.selected_ids,
            "selections": [s.to_dict() for s in self.selections],
            "metrics": self.metrics.to_dict(),
            "fallback_used": self.fallback_used,
            "qwk_degenerate": self.metrics.qwk_degenerate,
        }


@dataclass
class ExperimentReport:
    config: dict
    seed: int
    strategy: str
    iterations: list[IterationRecord] = field(default_factory=list)
    pool_exhausted: bool = False
    early_stopped: bool = False
    diversified_pool: list[int] | None = None
    # model trained at each iteration; models[t - 1] scored the picks of iteration t
    models: list[SoftmaxModel] = field(default_factory=list, repr=False)

    @property
    def final_metrics(self) -> MetricsBundle:
        return self.iterations[-1].metrics

    @property
    def baseline_metrics(self) -> MetricsBundle:
        return self.iterations[0].metrics

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "strategy": self.strategy,
            "iterations": [r.to_dict() for r in self.iterations],
            "final_metrics": self.final_metrics.to_dict(),
            "notes": {
                "pool_exhausted": self.pool_exhausted,
                "early_stopped": self.early_stopped,
                "fallback_iterations": [r.iteration for r in self.iterations if r.fallback_used],
                "qwk_degenerate_iterations": [
                    r.iteration for r in self.iterations if r.metrics.qwk_degenerate
                ],
            },
            "diversified_pool": self.diversified_pool,
        }


def select_from_candidates(
    strategy: str,
    model: SoftmaxModel,
    candidates: np.ndarray,
    covered: np.ndarray,
    budget: int,
    rng: np.random.Generator,
) -> SelectionOutcome:
    """Choose up to ``budget`` rows of ``candidates`` (an ``m x d`` matrix)."""
    if strategy == "random":
        return acquisition.random_select(candidates.shape[0], budget, rng)
    if strategy == "coreset":
        return kcenter_greedy(covered, candidates, budget)
    scores = acquisition.score_pool(predict_proba(model, candidates), strategy)
    return acquisition.select_batch(scores, budget)


def run_active_loop(split: DatasetSplit, cfg: LoopConfig) -> ExperimentReport:
    base_x, base_y = split.base()
    if base_x.count == 0 or split.test_x.count == 0:
        raise DomainError("active loop needs non-empty train and test sets")
    k = split.class_count
    pool_v, pool_l = split.pool_x.values, split.pool_y.labels
    train_v, train_l = base_x.values, base_y.labels

    report = ExperimentReport(config=cfg.echo(), seed=cfg.seed, strategy=cfg.strategy)
    remaining = np.arange(split.pool_x.count)
    if cfg.diversify_to is not None and remaining.size > cfg.diversify_to:
        remaining = np.sort(np.array(diversify_pool(pool_v, cfg.diversify_to).chosen_ids, dtype=np.int64))
        report.diversified_pool = remaining.tolist()

    def fit_and_score(iteration, selections, fallback):
        model = train(EmbeddingSet(train_v), LabelVector(train_l, k), cfg.train)
        metrics = evaluate(split.test_y, predict_labels(model, split.test_x), k)
        report.models.append(model)
        report.iterations.append(
            IterationRecord(iteration, int(train_l.size), cfg.strategy, metrics, selections, fallback)
        )
        return model, metrics.qwk

    model, best_qwk = fit_and_score(0, [], False)
    stale = 0
    for t in range(1, cfg.iterations + 1):
        if remaining.size == 0:
            report.pool_exhausted = True
            break
        picked, selections, fallback = [], [], False
        for c in range(k):
            cand = remaining[pool_l[remaining] == c]
            if cand.size == 0:
                continue
            rng = rng_for(cfg.seed, "loop", cfg.strategy, t, c)
            outcome = select_from_candidates(cfg.strategy, model, pool_v[cand], train_v, cfg.budget, rng)
            fallback |= outcome.used_fallback
            for local, score in zip(outcome.chosen_ids, outcome.scores_at_selection):
                idx = int(cand[local])
                picked.append(idx)
                selections.append(
                    Selection(
                        idx,
                        int(split.pool_x.ids[idx]),
                        int(pool_l[idx]),
                        float(split.pool_tags.psis[idx]),
                        score,
                    )
                )
        if len(picked) < k * cfg.budget:
            report.pool_exhausted = True
        if not picked:
            break
        picked_arr = np.array(picked, dtype=np.int64)
        remaining = np.setdiff1d(remaining, picked_arr, assume_unique=True)
        train_v = np.concatenate([train_v, pool_v[picked_arr]])
        train_l = np.concatenate([train_l, pool_l[picked_arr]])
        model, qwk_t = fit_and_score(t, selections, fallback)

        if cfg.early_stop is not None:
            patience, min_delta = cfg.early_stop
            if qwk_t > best_qwk + min_delta:
                best_qwk, stale = qwk_t, 0
            else:
                stale += 1
            if stale >= patience:
                report.early_stopped = True
                break
    log.debug("%s seed=%d final qwk=%.4f", cfg.strategy, cfg.seed, report.final_metrics.qwk)
    return report


# ---------------------------------------------------------------- saturation


@dataclass
class SummaryRow:
    label: str
    mean: dict
    std: dict
    runs: int

    def to_dict(self) -> dict:
        return {"label": self.label, "mean": self.mean, "std": self.std, "runs": self.runs}


def _train_eval(x, y, test_x, test_y, cfg: TrainConfig) -> MetricsBundle:
    model = train(x, y, cfg)
    return evaluate(test_y, predict_labels(model, test_x), y.class_count)


def _saturation_cell(args) -> MetricsBundle:
    split, size, seed, cfg = args
    x, y = stratified_subset(split.train_x, split.train_y, size, seed)
    return _train_eval(x, y, split.test_x, split.test_y, cfg)


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


def run_saturation(
    split: DatasetSplit, sizes, seeds, cfg: TrainConfig | None = None, jobs: int = 1
) -> list[SummaryRow]:
    """Per-class subset size vs. mean test metrics over seeds."""
    cfg = cfg or TrainConfig()
    sizes, seeds = [int(s) for s in sizes], [int(s) for s in seeds]
    tasks = [(split, size, seed, cfg) for size in sizes for seed in seeds]
    results = _map(_saturation_cell, tasks, jobs)
    rows = []
    for i, size in enumerate(sizes):
        bundles = results[i * len(seeds) : (i + 1) * len(seeds)]
        mean, std = aggregate(bundles)
        rows.append(SummaryRow(str(size), mean, std, len(bundles)))
    return rows


# ---------------------------------------------------------------- comparison


@dataclass(frozen=True)
class BenchmarkFactory:
    """Picklable ``seed -> DatasetSplit`` built from a benchmark template."""

    spec: BenchmarkSpec

    def __call__(self, seed: int) -> DatasetSplit:
        return make_benchmark(replace(self.spec, seed=int(seed)))


@dataclass
class ComparisonResult:
    rows: list[SummaryRow]
    reports: dict  # (strategy, seed) -> ExperimentReport

    def row(self, label: str) -> SummaryRow:
        return next(r for r in self.rows if r.label == label)


def _comparison_seed(args) -> list[ExperimentReport]:
    source, strategies, seed, cfg = args
    split = source(seed) if callable(source) else source
    return [run_active_loop(split, replace(cfg, strategy=s, seed=seed)) for s in strategies]


def run_strategy_comparison(
    split: DatasetSplit | Callable[[int], DatasetSplit],
    strategies,
    seeds,
    cfg: LoopConfig | None = None,
    jobs: int = 1,
) -> ComparisonResult:
    """Run every strategy for every seed; aggregate final metrics.

    ``split`` is either a fixed split shared by all seeds or a callable that
    builds the split for a seed (then every strategy of that seed still sees
    the identical split).
    """
    cfg = cfg or LoopConfig()
    strategies = [canonical_strategy(s) for s in strategies]
    if not strategies:
        raise DomainError("no strategies given")
    seeds = [int(s) for s in seeds]
    per_seed = _map(_comparison_seed, [(split, strategies, s, cfg) for s in seeds], jobs)

    reports = {}
    for seed, runs in zip(seeds, per_seed):
        for strategy, rep in zip(strategies, runs):
            reports[(strategy, seed)] = rep
    baseline = [per_seed[i][0].baseline_metrics for i in range(len(seeds))]
    rows = [SummaryRow("baseline", *aggregate(baseline), len(seeds))]
    for strategy in strategies:
        finals = [reports[(strategy, s)].final_metrics for s in seeds]
        rows.append(SummaryRow(strategy, *aggregate(finals), len(seeds)))
    return ComparisonResult(rows, reports)


# ---------------------------------------------------------------- tables


def summary_csv(reports) -> str:
    """Flat per-iteration table for a collection of reports."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for rep in reports:
        for rec in rep.iterations:
            m = rec.metrics
            writer.writerow(
                [rep.strategy, rep.seed, rec.iteration, rec.train_size]
                + [f"{v:.6f}" for v in (m.qwk, m.accuracy, m.f1_macro, m.precision_macro, m.recall_macro)]
            )
    return buf.getvalue()


def table_csv(rows: list[SummaryRow], label_column: str = "label") -> str:
    """Aggregated mean/std table, raw fractions with 6 decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = [label_column, "runs"]
    for key in METRIC_KEYS:
        header += [f"{key}_mean", f"{key}_std"]
    writer.writerow(header)
    for row in rows:
        cells = [row.label, row.runs]
        for key in METRIC_KEYS:
            cells += [f"{row.mean[key]:.6f}", f"{row.std[key]:.6f}"]
        writer.writerow(cells)
    return buf.getvalue()
