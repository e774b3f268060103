"""Command-line entry point.

Exit codes: 0 success, 1 I/O or numeric failure, 2 usage/validation error.
Every subcommand accepts ``--config FILE`` with ``key=value`` lines; flags
given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from augsel import __version__, embedio
from augsel.acquisition import STRATEGIES, canonical_strategy
from augsel.classifier import TrainConfig, load_model, predict_labels, save_model, train
from augsel.embedio import DatasetSplit, LabelVector
from augsel.errors import CorruptionError, DomainError, FormatError, NumericError
from augsel.metrics import METRIC_KEYS, confusion, evaluate, fid, qwk
from augsel.pipeline import (
    BenchmarkFactory,
    LoopConfig,
    run_active_loop,
    run_saturation,
    run_strategy_comparison,
    select_from_candidates,
    summary_csv,
    table_csv,
)
from augsel.synthpool import BenchmarkSpec, PoolSpec, build_pool, fit_generators, make_benchmark, rng_for

log = logging.getLogger("augsel")

EXT = {"binary": ".aemb", "text": ".csv"}
PROVENANCE = "pool_provenance.csv"
BASE_IDS = "base_ids.txt"


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------- parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed")
    g.add_argument("--config", default=None, help="key=value file; flags override it")
    g.add_argument("--out", default=None, help="output path (file or directory)")
    g.add_argument("--jobs", type=int, default=1, help="worker processes")
    g.add_argument("--format", choices=embedio.FORMATS, default="binary", help="embedding file format")
    g.add_argument("--classes", type=int, default=4, help="number of ordinal classes")
    g.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def _bench_args() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("benchmark")
    g.add_argument("--dim", type=int, default=8, help="embedding dimension")
    g.add_argument("--spacing", type=float, default=1.0, help="distance between neighbouring class means")
    g.add_argument("--spread", type=float, default=0.9, help="isotropic class standard deviation")
    g.add_argument(
        "--proportions", type=_floats, default="0.5414,0.2707,0.1112,0.0767", help="train class proportions"
    )
    g.add_argument("--train-size", type=int, default=8000, help="imbalanced train population")
    g.add_argument("--test-per-class", type=int, default=500, help="balanced test size per class")
    g.add_argument("--train-per-class", type=int, default=50, help="balanced base set size per class")
    g.add_argument("--truncations", type=_floats, default="0.5,1.2,2.0", help="pool truncation values")
    g.add_argument("--pool-per-class", type=int, default=100, help="pool samples per (class, truncation)")
    g.add_argument(
        "--generator-source", choices=("train", "base"), default="train", help="rows the generators are fitted on"
    )
    return p


def _train_args() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("classifier")
    g.add_argument("--lr", type=float, default=0.5, help="gradient descent step size")
    g.add_argument("--epochs", type=int, default=300, help="full-batch steps")
    g.add_argument("--l2", type=float, default=1e-3, help="weight decay")
    return p


def _loop_args() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("active loop")
    g.add_argument("--budget", type=int, default=10, help="samples added per class per iteration")
    g.add_argument("--iterations", type=int, default=5, help="selection rounds after the baseline")
    g.add_argument("--diversify-to", type=int, default=None, help="k-center pre-shrink of the pool")
    g.add_argument("--early-stop", action="store_true", help="stop when test QWK stalls")
    g.add_argument("--patience", type=int, default=3, help="early-stop rounds without gain")
    g.add_argument("--min-delta", type=float, default=0.001, help="QWK gain that resets patience")
    g.add_argument("--data", default=None, help="split directory from gen-bench; generated when omitted")
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="augsel", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common, bench, trainp, loopp = _common(), _bench_args(), _train_args(), _loop_args()
    subs = {}

    def add(name, help_text, parents):
        subs[name] = sub.add_parser(name, help=help_text, parents=[common, *parents], formatter_class=fmt)
        return subs[name]

    add("gen-bench", "write a synthetic ordinal benchmark split", [bench])

    p = add("gen-pool", "fit class generators and write a synthetic pool", [])
    p.add_argument("--data", default=None, help="embedding file to fit generators on")
    p.add_argument("--base-ids", default=None, help="optional row subset (one position per line)")
    p.add_argument("--truncations", type=_floats, default="0.5,1.2,2.0", help="truncation values")
    p.add_argument("--pool-per-class", type=int, default=100, help="samples per (class, truncation)")

    p = add("train", "train a softmax classifier and save it", [trainp])
    p.add_argument("--data", default=None, help="embedding file with labels")

    p = add("eval", "evaluate a saved model on an embedding file", [])
    p.add_argument("--model", default=None, help="saved model file")
    p.add_argument("--data", default=None, help="embedding file with labels")
    p.add_argument("--pred-out", default=None, help="write predicted labels, one per line")

    p = add("select", "pick pool samples with an acquisition strategy", [])
    p.add_argument("--model", default=None, help="saved model (scored strategies)")
    p.add_argument("--pool", default=None, help="pool embedding file")
    p.add_argument("--labeled", default=None, help="labeled embedding file (coreset)")
    p.add_argument("--strategy", choices=STRATEGIES, default="neighbour-margin", help="acquisition strategy")
    p.add_argument("--budget", type=int, default=10, help="samples per class")

    p = add("loop", "run the augment/select/retrain loop", [bench, trainp, loopp])
    p.add_argument("--strategy", choices=STRATEGIES, default="neighbour-margin", help="acquisition strategy")
    p.add_argument("--summary", default=None, help="also write the flat per-iteration CSV")

    p = add("saturation", "metric vs. real training size", [bench, trainp])
    p.add_argument("--data", default=None, help="split directory; generated when omitted")
    p.add_argument(
        "--sizes", type=_ints, default="50,100,150,200,250,300,350,400,450,500", help="per-class train sizes"
    )
    p.add_argument("--seeds", type=int, default=20, help="number of seeds (seed, seed+1, ...)")

    p = add("compare", "compare strategies over seeds", [bench, trainp, loopp])
    p.add_argument("--strategies", default=",".join(STRATEGIES), help="comma-separated strategies")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds (seed, seed+1, ...)")
    p.add_argument("--summary", default=None, help="also write the flat per-iteration CSV")

    p = add("qwk", "quadratic weighted kappa of two label files", [])
    p.add_argument("--true", dest="true_labels", default=None, help="true labels, one per line")
    p.add_argument("--pred", dest="pred_labels", default=None, help="predicted labels, one per line")

    p = add("fid", "Frechet distance between two embedding files", [])
    p.add_argument("files", nargs="*", help="two embedding files")
    return parser, subs


def _apply_config(sub: argparse.ArgumentParser, path: str) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    defaults = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in actions or not actions[dest].option_strings:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        action = actions[dest]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[dest] = value.lower() in ("1", "true", "yes", "on")
        else:
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"{path}:{lineno}: {key} must be one of {', '.join(action.choices)}")
            defaults[dest] = value  # argparse converts string defaults with the action type
    sub.set_defaults(**defaults)


def parse(argv) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a subcommand is required")
    if args.config:
        _apply_config(subs[args.command], args.config)
        args = parser.parse_args(argv)
    args._parser = subs[args.command]
    return args


# ---------------------------------------------------------------- helpers


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) in (None, [], ())]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise UsageError(f"missing required option(s): {flags}")


def _bench_spec(args, seed: int) -> BenchmarkSpec:
    return BenchmarkSpec(
        class_count=args.classes,
        dim=args.dim,
        spacing=args.spacing,
        class_spread=args.spread,
        proportions=tuple(args.proportions),
        train_size=args.train_size,
        test_per_class=args.test_per_class,
        base_per_class=args.train_per_class,
        pool=PoolSpec(tuple(args.truncations), args.pool_per_class, seed),
        generator_source=args.generator_source,
        seed=seed,
    )


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs, l2=args.l2, seed=args.seed)


def _loop_cfg(args, strategy: str) -> LoopConfig:
    return LoopConfig(
        strategy=strategy,
        budget=args.budget,
        iterations=args.iterations,
        diversify_to=args.diversify_to,
        train=_train_cfg(args),
        early_stop=(args.patience, args.min_delta) if args.early_stop else None,
        seed=args.seed,
    )


def _seeds(args) -> list[int]:
    if args.seeds < 1:
        raise UsageError("--seeds must be >= 1")
    return [args.seed + i for i in range(args.seeds)]


def write_split(split: DatasetSplit, out: Path, fmt: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    ext = EXT[fmt]
    embedio.write_embeddings(split.train_x, split.train_y, out / f"train{ext}", fmt)
    embedio.write_embeddings(split.test_x, split.test_y, out / f"test{ext}", fmt)
    embedio.write_embeddings(split.pool_x, split.pool_y, out / f"pool{ext}", fmt)
    embedio.write_provenance(split.pool_tags, out / PROVENANCE)
    if split.base_ids is not None:
        embedio.write_ids(split.base_ids, out / BASE_IDS)


def load_split(directory, class_count: int = 4) -> DatasetSplit:
    directory = Path(directory)
    for fmt, ext in EXT.items():
        if (directory / f"train{ext}").exists():
            break
    else:
        raise FileNotFoundError(f"no train file in {directory}")
    parts = [embedio.read_embeddings(directory / f"{name}{ext}", fmt, class_count) for name in ("train", "test", "pool")]
    tags = embedio.read_provenance(directory / PROVENANCE)
    base = embedio.read_ids(directory / BASE_IDS) if (directory / BASE_IDS).exists() else None
    (tx, ty), (sx, sy), (px, py) = parts
    if fmt == "binary":
        # the binary layout stores no ids; number partitions consecutively as gen-bench does
        sx.ids = tx.count + np.arange(sx.count)
        px.ids = tx.count + sx.count + np.arange(px.count)
    return DatasetSplit(tx, ty, sx, sy, px, py, tags, base)


def _read_labels(path, class_count: int) -> LabelVector:
    return LabelVector(embedio.read_ids(path), class_count)


def _pct(bundle_or_dict) -> str:
    get = bundle_or_dict.get if isinstance(bundle_or_dict, dict) else lambda k: getattr(bundle_or_dict, k)
    return "  ".join(f"{k}={100 * get(k):5.1f}%" for k in METRIC_KEYS)


def _write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------- commands


def cmd_gen_bench(args) -> None:
    _require(args, "out")
    split = make_benchmark(_bench_spec(args, args.seed))
    write_split(split, Path(args.out), args.format)
    print(f"wrote train={split.train_x.count} test={split.test_x.count} pool={split.pool_x.count} to {args.out}")


def cmd_gen_pool(args) -> None:
    _require(args, "data", "out")
    x, y = embedio.read_embeddings(args.data, None, args.classes)
    if args.base_ids:
        ids = embedio.read_ids(args.base_ids)
        x, y = x.take(ids), y.take(ids)
    px, py, tags = build_pool(fit_generators(x, y), PoolSpec(tuple(args.truncations), args.pool_per_class, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    embedio.write_embeddings(px, py, out / f"pool{EXT[args.format]}", args.format)
    embedio.write_provenance(tags, out / PROVENANCE)
    print(f"wrote pool of {px.count} samples to {out}")


def cmd_train(args) -> None:
    _require(args, "data", "out")
    x, y = embedio.read_embeddings(args.data, None, args.classes)
    model = train(x, y, _train_cfg(args))
    save_model(model, args.out)
    print(f"trained K={model.class_count} d={model.dim} on {x.count} samples -> {args.out}")


def cmd_eval(args) -> None:
    _require(args, "model", "data")
    model = load_model(args.model)
    x, y = embedio.read_embeddings(args.data, None, model.class_count)
    pred = predict_labels(model, x)
    bundle = evaluate(y, pred, model.class_count)
    print(_pct(bundle))
    if args.out:
        embedio.write_report({"n": x.count, "metrics": bundle.to_dict()}, args.out)
    if args.pred_out:
        embedio.write_ids(pred.labels, args.pred_out)


def cmd_select(args) -> None:
    _require(args, "pool", "out")
    strategy = canonical_strategy(args.strategy)
    if args.budget < 1:
        raise UsageError("--budget must be >= 1")
    px, py = embedio.read_embeddings(args.pool, None, args.classes)
    model = None
    if strategy in ("entropy", "margin", "neighbour-margin"):
        _require(args, "model")
        model = load_model(args.model)
    covered = np.zeros((0, px.dim))
    if args.labeled:
        covered = embedio.read_embeddings(args.labeled, None, args.classes)[0].values
    lines = ["pool_index,class,score,finite"]
    for c in range(py.class_count):
        cand = np.flatnonzero(py.labels == c)
        if cand.size == 0:
            continue
        rng = rng_for(args.seed, "select", strategy, c)
        outcome = select_from_candidates(strategy, model, px.values[cand], covered, args.budget, rng)
        for local, score in zip(outcome.chosen_ids, outcome.scores_at_selection):
            if score is None:
                value, finite = "", ""
            else:
                value = repr(score.value) if score.finite else ""
                finite = str(score.finite).lower()
            lines.append(f"{int(cand[local])},{c},{value},{finite}")
    _write_text(args.out, "\n".join(lines) + "\n")
    print(f"selected {len(lines) - 1} samples -> {args.out}")


def _split_for(args):
    if args.data:
        return load_split(args.data, args.classes)
    return make_benchmark(_bench_spec(args, args.seed))


def cmd_loop(args) -> None:
    _require(args, "out")
    cfg = _loop_cfg(args, args.strategy)
    report = run_active_loop(_split_for(args), cfg)
    embedio.write_report(report, args.out)
    if args.summary:
        _write_text(args.summary, summary_csv([report]))
    for rec in report.iterations:
        print(f"iter {rec.iteration}  n={rec.train_size:4d}  {_pct(rec.metrics)}")


def cmd_saturation(args) -> None:
    _require(args, "out")
    if not args.sizes or min(args.sizes) < 1:
        raise UsageError("--sizes must be positive integers")
    rows = run_saturation(_split_for(args), args.sizes, _seeds(args), _train_cfg(args), args.jobs)
    _write_text(args.out, table_csv(rows, "size"))
    for row in rows:
        print(f"{row.label:>5}  {_pct(row.mean)}")


def cmd_compare(args) -> None:
    _require(args, "out")
    strategies = [canonical_strategy(s) for s in args.strategies.split(",") if s.strip()]
    cfg = _loop_cfg(args, strategies[0] if strategies else "random")
    source = load_split(args.data, args.classes) if args.data else BenchmarkFactory(_bench_spec(args, 0))
    result = run_strategy_comparison(source, strategies, _seeds(args), cfg, args.jobs)
    _write_text(args.out, table_csv(result.rows, "strategy"))
    if args.summary:
        _write_text(args.summary, summary_csv(result.reports[k] for k in sorted(result.reports)))
    for row in result.rows:
        print(f"{row.label:>17}  {_pct(row.mean)}")


def cmd_qwk(args) -> None:
    _require(args, "true_labels", "pred_labels")
    t = _read_labels(args.true_labels, args.classes)
    p = _read_labels(args.pred_labels, args.classes)
    text = f"{qwk(confusion(t, p, args.classes)):.6f}"
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")


def cmd_fid(args) -> None:
    if len(args.files) != 2:
        raise UsageError("fid needs exactly two embedding files")
    a, _ = embedio.read_embeddings(args.files[0], None, 256)
    b, _ = embedio.read_embeddings(args.files[1], None, 256)
    text = f"{fid(a, b):.6f}"
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")


COMMANDS = {
    "gen-bench": cmd_gen_bench,
    "gen-pool": cmd_gen_pool,
    "train": cmd_train,
    "eval": cmd_eval,
    "select": cmd_select,
    "loop": cmd_loop,
    "saturation": cmd_saturation,
    "compare": cmd_compare,
    "qwk": cmd_qwk,
    "fid": cmd_fid,
}


def main(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse usage errors and --help/--version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"augsel: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:  # unreadable --config file
        print(f"augsel: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        args._parser.print_usage(sys.stderr)
        print(f"augsel {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FormatError, CorruptionError, NumericError) as exc:
        print(f"augsel {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
