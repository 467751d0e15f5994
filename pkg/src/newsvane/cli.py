"""Command-line interface exposing the full pipeline.

Subcommands: synth, prepare, train, evaluate, backtest, sweep, gradcheck,
neighbors. Runs are driven by a JSON config file plus overriding flags; all
randomness flows from the mandatory seed through named streams, so rerunning
a command with the same inputs reproduces its outputs byte for byte.

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import functools
import io
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import backtest as bt
from . import corpus, embeddings, gradcheck, pipeline, training
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .fileio import read_json, write_json_atomic, write_text_atomic
from .network import HEAD_BINARY, HEAD_MULTICLASS3, ModelConfig, forward, init_parameters
from .seeding import derive_seed
from .text import PAD_TOKEN, save_vocabulary, vocabulary_hash


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    headlines_path: Path
    prices_path: Path
    out_dir: Path
    portfolio: tuple[str, ...]
    seed: int
    pretrained_path: Path | None = None
    min_relevance: float = 1.0
    # model
    p: int = 16
    filter_widths: tuple[int, ...] = (3, 4)
    filters_per_width: int = 6
    pool_w: int = 2
    hidden_sizes: tuple[int, int] = (32, 16)
    dropout_rate: float = 0.25
    head: str = HEAD_BINARY
    max_len: int | None = None
    embedding_mode: str = embeddings.MODE_SELF_LEARNT
    embedding_init_mean: float = 0.0
    embedding_init_std: float = 0.1
    # training
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 1e-3
    validation_fraction: float = 0.2
    select_on_test: bool = False
    grid: training.GridAxes | None = None
    # strategy
    threshold: float = 0.5
    strategy_head: str | None = None
    sweep_step: float = 0.01


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_run_config(path: str | Path, args: argparse.Namespace) -> RunConfig:
    raw = read_json(path)
    paths = raw.get("paths", {})
    model = raw.get("model", {})
    tr = raw.get("training", {})
    strat = raw.get("strategy", {})

    seed = args.seed if args.seed is not None else tr.get("seed")
    _require(seed is not None, "a seed is mandatory (training.seed or --seed)")
    out_dir = Path(args.out_dir) if args.out_dir else Path(paths.get("out_dir", "out"))

    grid = None
    if "grid" in tr:
        g = tr["grid"]
        grid = training.GridAxes(
            epochs=tuple(int(e) for e in g.get("epochs", [tr.get("epochs", 10)])),
            dropout=tuple(float(d) for d in g.get("dropout", [model.get("dropout_rate", 0.25)])),
            width_sets=tuple(
                tuple(int(h) for h in ws) for ws in g.get("width_sets", [model.get("filter_widths", [3, 4])])
            ),
            modes=tuple(g.get("modes", [model.get("embedding_mode", "self_learnt")])),
        )

    cfg = RunConfig(
        headlines_path=Path(paths.get("headlines", "")),
        prices_path=Path(paths.get("prices", "")),
        pretrained_path=Path(paths["pretrained"]) if paths.get("pretrained") else None,
        out_dir=out_dir,
        portfolio=tuple(raw.get("portfolio", [])),
        min_relevance=float(raw.get("min_relevance", 1.0)),
        seed=int(seed),
        p=int(model.get("p", 16)),
        filter_widths=tuple(int(h) for h in model.get("filter_widths", [3, 4])),
        filters_per_width=int(model.get("filters_per_width", 6)),
        pool_w=int(model.get("pool_w", 2)),
        hidden_sizes=tuple(int(x) for x in model.get("hidden_sizes", [32, 16])),
        dropout_rate=float(model.get("dropout_rate", 0.25)),
        head=str(model.get("head", HEAD_BINARY)),
        max_len=int(model["max_len"]) if model.get("max_len") else None,
        embedding_mode=str(model.get("embedding_mode", embeddings.MODE_SELF_LEARNT)),
        embedding_init_mean=float(model.get("embedding_init_mean", 0.0)),
        embedding_init_std=float(model.get("embedding_init_std", 0.1)),
        epochs=int(tr.get("epochs", 10)),
        batch_size=int(tr.get("batch_size", 32)),
        learning_rate=float(tr.get("learning_rate", 1e-3)),
        validation_fraction=float(tr.get("validation_fraction", 0.2)),
        select_on_test=bool(tr.get("select_on_test", False)),
        grid=grid,
        threshold=float(strat.get("threshold", 0.5)),
        strategy_head=strat.get("head"),
        sweep_step=float(strat.get("sweep_step", 0.01)),
    )
    _require(cfg.portfolio != (), "portfolio must list at least one ticker")
    _require(cfg.headlines_path.is_file(), f"headlines file not found: {cfg.headlines_path}")
    _require(cfg.prices_path.is_file(), f"prices file not found: {cfg.prices_path}")
    if cfg.embedding_mode in (embeddings.MODE_STATIC, embeddings.MODE_NON_STATIC):
        _require(
            cfg.pretrained_path is not None and cfg.pretrained_path.is_file(),
            f"embedding mode {cfg.embedding_mode!r} requires an existing paths.pretrained file",
        )
    if cfg.strategy_head is not None:
        _require(cfg.strategy_head in (HEAD_BINARY, HEAD_MULTICLASS3),
                 f"unknown strategy head {cfg.strategy_head!r}")
    return cfg


def _build_table(cfg: RunConfig, vocab, mode: str, seed: int) -> embeddings.EmbeddingTable:
    if mode == embeddings.MODE_SELF_LEARNT:
        return embeddings.init_self_learnt(
            vocab, cfg.p, mean=cfg.embedding_init_mean, std=cfg.embedding_init_std, seed=seed
        )
    return embeddings.load_pretrained(
        vocab, cfg.pretrained_path, mode, seed=seed, expected_p=cfg.p
    )


def _prepare(cfg: RunConfig) -> pipeline.PreparedData:
    headlines = corpus.load_headlines(cfg.headlines_path, cfg.min_relevance)
    prices = corpus.load_prices(cfg.prices_path)
    return pipeline.prepare_dataset(headlines, prices, set(cfg.portfolio), max_len=cfg.max_len)


def _model_config(cfg: RunConfig, m: int) -> ModelConfig:
    return ModelConfig(
        p=cfg.p, m=m, filter_widths=cfg.filter_widths,
        filters_per_width=cfg.filters_per_width, hidden_sizes=cfg.hidden_sizes,
        dropout_rate=cfg.dropout_rate, pool_w=cfg.pool_w, head=cfg.head,
    )


# --- subcommands ------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    if min(args.n_assets, args.n_days, args.headlines_per_day) < 1:
        raise ConfigError("n-assets, n-days and headlines-per-day must all be >= 1")
    headlines, prices = corpus.generate_synthetic(
        seed=args.seed if args.seed is not None else 0,
        n_assets=args.n_assets,
        n_days=args.n_days,
        headlines_per_day=args.headlines_per_day,
        signal_strength=args.signal_strength,
    )
    out = Path(args.out_dir or "out")
    corpus.write_headlines_csv(headlines, out / "headlines.csv")
    corpus.write_prices_csv(prices, out / "prices.csv")
    print(f"wrote {len(headlines)} headlines and {len(prices)} price bars to {out}/")
    return 0


def cmd_prepare(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    prepared = _prepare(cfg)
    out = cfg.out_dir
    save_vocabulary(prepared.vocab, out / "vocab.tsv")
    write_json_atomic(
        out / "split.json",
        {
            "train_ids": sorted(prepared.split.train_ids),
            "test_ids": sorted(prepared.split.test_ids),
            "test_dates": [d.isoformat() for d in prepared.split.test_dates],
            "n_unlabeled": prepared.n_unlabeled,
        },
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["headline_id", "asset", "date", "trade_date", "next_day_return",
         "binary_label", "tri_label", "role", "true_len"]
    )
    for role, samples in (("train", prepared.train), ("test", prepared.test)):
        for s in samples:
            writer.writerow(
                [s.headline_id, s.asset, s.date.isoformat(), s.trade_date.isoformat(),
                 repr(s.next_day_return), s.binary_label, s.tri_label, role, s.enc.true_len]
            )
    write_text_atomic(out / "samples.csv", buf.getvalue())
    print(
        f"vocab size {prepared.vocab.size}, max_len {prepared.vocab.max_len}; "
        f"{len(prepared.train)} train / {len(prepared.test)} test samples "
        f"on {len(prepared.split.test_dates)} test dates; wrote {out}/"
    )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    prepared = _prepare(cfg)
    vocab = prepared.vocab
    model_config = _model_config(cfg, vocab.max_len)

    if cfg.grid is not None:
        if cfg.select_on_test:
            fit, selection = prepared.train, prepared.test
        else:
            fit, selection = pipeline.validation_slice(
                prepared.train, cfg.validation_fraction, cfg.seed
            )
        results = training.grid_search(
            pipeline.to_pairs(fit, cfg.head),
            pipeline.to_pairs(selection, cfg.head),
            model_config,
            cfg.grid,
            functools.partial(_build_table, cfg, vocab),
            seed=cfg.seed,
            total_filters=model_config.total_filters,
            batch_size=cfg.batch_size,
            lr=cfg.learning_rate,
            parallel=args.parallel,
        )
        training.write_grid_results(
            results, cfg.out_dir / "grid.csv", cfg.out_dir / "grid_summary.json"
        )
        best = results[0]
        print(
            f"grid search: {len(results)} cells; best widths={best.widths} mode={best.mode} "
            f"dropout={best.dropout} epochs={best.epochs} f1={best.f1:.4f}"
        )
        model_config = replace(
            model_config,
            filter_widths=best.widths,
            filters_per_width=model_config.total_filters // len(best.widths),
            dropout_rate=best.dropout,
        )
        cfg = replace(cfg, embedding_mode=best.mode, epochs=best.epochs)

    table = _build_table(cfg, vocab, cfg.embedding_mode, derive_seed(cfg.seed, "embeddings"))
    params = init_parameters(
        model_config, np.random.default_rng(derive_seed(cfg.seed, "params-init"))
    )
    result = training.train(
        pipeline.to_pairs(prepared.train, cfg.head), table, params, model_config,
        epochs=cfg.epochs, batch_size=cfg.batch_size,
        seed=derive_seed(cfg.seed, "train"), lr=cfg.learning_rate,
    )
    metrics = training.evaluate(
        pipeline.to_pairs(prepared.test, cfg.head), table, params, model_config
    )

    out = cfg.out_dir
    save_checkpoint(
        out / "checkpoint.json", model_config, vocab, table, params,
        training_meta={
            "epochs": cfg.epochs, "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate, "seed": cfg.seed,
            "embedding_mode": cfg.embedding_mode,
        },
    )
    write_json_atomic(out / "metrics.json", metrics.to_dict())
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "mean_loss", "accuracy"])
    for row in result.trace:
        writer.writerow([row.epoch, repr(row.mean_loss), repr(row.accuracy)])
    write_text_atomic(out / "trace.csv", buf.getvalue())
    print(
        f"trained {cfg.epochs} epochs on {len(prepared.train)} samples; "
        f"test accuracy {metrics.accuracy:.4f}, f1 {metrics.f1:.4f}; wrote {out}/"
    )
    return 0


def _load_checkpoint_for(cfg: RunConfig, args: argparse.Namespace) -> Checkpoint:
    path = Path(args.checkpoint) if args.checkpoint else cfg.out_dir / "checkpoint.json"
    _require(path.is_file(), f"checkpoint not found: {path}")
    ckpt = load_checkpoint(path)
    # widths/dropout/epochs may come from a grid search, but the embedding
    # dimension and the head must agree with the config driving this run
    if ckpt.config.p != cfg.p or ckpt.config.head != cfg.head:
        raise ConfigError(
            f"checkpoint (p={ckpt.config.p}, head={ckpt.config.head!r}) is incompatible "
            f"with the config (p={cfg.p}, head={cfg.head!r})"
        )
    return ckpt


def _check_vocab_hash(cfg: RunConfig, prepared: pipeline.PreparedData, ckpt: Checkpoint) -> None:
    if vocabulary_hash(prepared.vocab) != ckpt.vocab_hash:
        raise ConfigError(
            "vocabulary hash mismatch: the data/config no longer reproduce the "
            "vocabulary this checkpoint was trained with"
        )


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    ckpt = _load_checkpoint_for(cfg, args)
    prepared = _prepare(cfg)
    _check_vocab_hash(cfg, prepared, ckpt)
    metrics = training.evaluate(
        pipeline.to_pairs(prepared.test, ckpt.config.head), ckpt.table, ckpt.params,
        ckpt.config, class_threshold=args.class_threshold,
    )
    write_json_atomic(cfg.out_dir / "metrics.json", metrics.to_dict())
    print(
        f"test accuracy {metrics.accuracy:.4f}, precision {metrics.precision:.4f}, "
        f"recall {metrics.recall:.4f}, f1 {metrics.f1:.4f} over {metrics.n_samples} samples"
    )
    return 0


def _read_predictions_csv(path: Path) -> list[tuple[int, str, dt.date, float | np.ndarray]]:
    rows: list[tuple[int, str, dt.date, float | np.ndarray]] = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header not in (["asset", "date", "p0"], ["asset", "date", "p0", "p1", "p2"]):
            raise ConfigError(f"{path}: expected header asset,date,p0[,p1,p2]")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                date = dt.datetime.strptime(row[1], "%Y-%m-%d").date()
                if len(row) == 3:
                    output: float | np.ndarray = float(row[2])
                elif len(row) == 5:
                    output = np.array([float(x) for x in row[2:5]])
                else:
                    raise ValueError(f"expected 3 or 5 fields, got {len(row)}")
            except ValueError as exc:
                raise ConfigError(f"{path}: line {lineno}: {exc}") from exc
            rows.append((lineno, row[0], date, output))
    if not rows:
        raise ConfigError(f"{path}: no prediction rows")
    return rows


def _day_predictions(
    cfg: RunConfig, args: argparse.Namespace
) -> tuple[list[bt.DayPrediction], list[corpus.PriceBar], str]:
    """Day predictions from either a predictions CSV or a checkpoint run."""
    prices = corpus.load_prices(cfg.prices_path)
    if getattr(args, "predictions", None):
        rows = _read_predictions_csv(Path(args.predictions))
        head = HEAD_BINARY if np.isscalar(rows[0][3]) else HEAD_MULTICLASS3
        return bt.aggregate_daily(rows), prices, head
    ckpt = _load_checkpoint_for(cfg, args)
    prepared = _prepare(cfg)
    _check_vocab_hash(cfg, prepared, ckpt)
    outputs = []
    for s in prepared.test:
        output, _ = forward(s.enc, ckpt.table, ckpt.params, ckpt.config, mode="test")
        outputs.append((s.headline_id, s.asset, s.date, output))
    return bt.aggregate_daily(outputs), prices, ckpt.config.head


def _check_strategy_head(cfg: RunConfig, model_head: str) -> None:
    if cfg.strategy_head is not None and cfg.strategy_head != model_head:
        raise ConfigError(
            f"strategy head {cfg.strategy_head!r} does not match the model head {model_head!r}"
        )


def cmd_backtest(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    day_preds, prices, head = _day_predictions(cfg, args)
    _check_strategy_head(cfg, head)
    decide = bt.decide_binary if head == HEAD_BINARY else bt.decide_multiclass
    decisions = [(dp.asset, dp.date, decide(dp, cfg.threshold)) for dp in day_preds]
    report = bt.simulate(decisions, prices)
    bt.write_report_json(report, cfg.out_dir / "report.json")
    print(
        f"{report.n_trades} trades; total return {report.total_return_pct:.2f}%, "
        f"PP {report.pp_pct:.2f}%, ATP {report.atp_pct:.4f}%"
    )
    if args.sweep:
        grid = bt.default_threshold_grid(head == HEAD_BINARY, step=cfg.sweep_step)
        rows = bt.threshold_sweep(day_preds, prices, grid)
        bt.write_sweep_csv(rows, cfg.out_dir / "sweep.csv")
        print(f"threshold sweep: {len(rows)} rows written to {cfg.out_dir / 'sweep.csv'}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config, args)
    day_preds, prices, head = _day_predictions(cfg, args)
    _check_strategy_head(cfg, head)
    grid = bt.default_threshold_grid(head == HEAD_BINARY, step=cfg.sweep_step)
    rows = bt.threshold_sweep(day_preds, prices, grid)
    bt.write_sweep_csv(rows, cfg.out_dir / "sweep.csv")
    best = max(rows, key=lambda r: r.atp_pct)
    print(
        f"{len(rows)} thresholds; best ATP {best.atp_pct:.4f}% at t={best.t:.2f} "
        f"({best.n_trades} trades); wrote {cfg.out_dir / 'sweep.csv'}"
    )
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    suite = gradcheck.run_suite(
        seed=args.seed if args.seed is not None else 0,
        n_configs=args.configs,
        perturb=args.perturb,
    )
    for i, r in enumerate(suite.results):
        print(f"config {i:2d}: max rel error {r.max_rel_error:.3e} ({r.description})")
    verdict = "PASS" if suite.passed else "FAIL"
    print(
        f"gradcheck {verdict}: max relative error {suite.max_rel_error:.3e} "
        f"(tolerance {suite.tolerance:.0e}) over {len(suite.results)} configs "
        f"in {suite.elapsed_s:.2f}s"
    )
    return 0 if suite.passed else 1


def cmd_neighbors(args: argparse.Namespace) -> int:
    path = Path(args.checkpoint)
    _require(path.is_file(), f"checkpoint not found: {path}")
    ckpt = load_checkpoint(path)
    if args.token == PAD_TOKEN:
        raise ConfigError("the padding token has no meaningful neighbors")
    neighbors = embeddings.nearest_neighbors(args.token, args.k, ckpt.table, ckpt.vocab)
    for token, sim in neighbors:
        print(f"{token}\t{sim:.6f}")
    return 0


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to the JSON run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default=None, help="override the output directory")
    common.add_argument("--parallel", action="store_true",
                        help="run independent grid-search cells in parallel")

    parser = argparse.ArgumentParser(
        prog="newsvane",
        description="Headline-driven next-day stock movement classification and trading simulation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    p.add_argument("--n-assets", type=int, default=2)
    p.add_argument("--n-days", type=int, default=300)
    p.add_argument("--headlines-per-day", type=int, default=5)
    p.add_argument("--signal-strength", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", parents=[common],
                       help="materialize the labeled, split, encoded dataset")
    p.set_defaults(func=cmd_prepare, needs_config=True)

    p = sub.add_parser("train", parents=[common], help="train a model and write a checkpoint")
    p.set_defaults(func=cmd_train, needs_config=True)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--class-threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate, needs_config=True)

    p = sub.add_parser("backtest", parents=[common], help="simulate the trading strategy")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--predictions", default=None,
                   help="standalone predictions CSV (asset,date,p0[,p1,p2]) instead of a checkpoint")
    p.add_argument("--sweep", action="store_true", help="also write the threshold sweep CSV")
    p.set_defaults(func=cmd_backtest, needs_config=True)

    p = sub.add_parser("sweep", parents=[common], help="threshold sweep over the strategy grid")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--predictions", default=None)
    p.set_defaults(func=cmd_sweep, needs_config=True)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="verify analytic gradients against finite differences")
    p.add_argument("--configs", type=int, default=20)
    p.add_argument("--perturb", type=float, default=0.0,
                   help="testing hook: inject this error into one analytic gradient")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("neighbors", parents=[common],
                       help="cosine-similarity neighbors of a vocabulary token")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("token")
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(func=cmd_neighbors)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_config", False) and not args.config:
        parser.error(f"{args.command} requires --config")
    try:
        return args.func(args)
    except (ConfigError, CheckpointError, ValueError, KeyError, FileNotFoundError) as exc:
        message = exc.args[0] if exc.args else str(exc)
        print(f"error: {message}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
