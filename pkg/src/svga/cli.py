"""Command-line entry point: ``svga <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical abort.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bn
from . import metrics as mt
from . import model as mdl
from .baselines import neigh_agg
from .classify import SingleClassError, downstream_classify
from .data import DataError, FeatureTable, load_dataset, make_splits, read_features, read_labels, sample_label_mask, write_features
from .graph import GraphError, build_graph, read_edge_list
from .linalg import NumericalError
from .trainer import SEARCH_GRID, TrainConfig, Trainer, grid_search, run_ablation

log = logging.getLogger("svga")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4
RUN_FILES = ("config", "checkpoint", "trainlog", "metrics", "xhat")


class UsageError(Exception):
    pass


def _bool(s: str) -> bool:
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {s!r}")


def _data_args(p, labels=True):
    p.add_argument("--edges", required=True, help="edge list (u<TAB>v per line)")
    p.add_argument("--features", required=True, help="feature file")
    if labels:
        p.add_argument("--labels", default=None, help="label file (i<TAB>class per line)")
    p.add_argument("--split-seed", type=int, default=0, help="seed of the 4:1:5 node split")


def _train_args(p):
    p.add_argument("--dim", type=int, default=256, help="latent size d")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="regularizer weight")
    p.add_argument("--beta", type=float, default=1.0, help="prior/covariance scale")
    p.add_argument("--alpha-logdet", type=float, default=0.5, help="weight of the log-determinant term")
    p.add_argument("--dropout", type=float, default=0.5, help="dropout on the hidden layer")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--epochs", type=int, default=2000, help="maximum epochs")
    p.add_argument("--patience", type=int, default=100, help="early-stopping patience")
    p.add_argument("--variant", choices=("det", "stoch", "noreg"), default="det", help="model variant")
    p.add_argument("--rank", type=int, default=None, help="rank r of the stochastic covariance (default d)")
    p.add_argument("--unit-norm", type=_bool, default=True, help="unit-normalize embeddings (true|false)")
    p.add_argument("--label-ratio", type=float, default=0.0, help="fraction of nodes with observed labels")
    p.add_argument("--seed", type=int, default=0, help="training seed")
    p.add_argument("--reduction", choices=("sum", "mean"), default="sum", help="loss reduction over nodes")
    p.add_argument("--val-metric", default=None, help="validation metric (default recall@10 or neg_rmse)")
    p.add_argument("--float32", action="store_true", help="train in 32-bit floats")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="svga", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a run directory", formatter_class=fmt)
    _data_args(p)
    _train_args(p)
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--write-xhat", action="store_true", help="also write test-node estimates")

    p = sub.add_parser("estimate", help="write feature estimates in the dense format", formatter_class=fmt)
    _data_args(p, labels=False)
    p.add_argument("--method", choices=("svga", "neighagg"), default="svga", help="estimator")
    p.add_argument("--run", default=None, help="run directory with a checkpoint (svga)")
    p.add_argument("--hops", type=int, default=1, help="neighagg hops (1 or 2)")
    p.add_argument("--nodes", choices=("test", "val", "train", "all"), default="test", help="nodes to estimate")
    p.add_argument("--out", required=True, help="output feature file; node ids go to <out>.nodes")

    p = sub.add_parser("evaluate", help="metrics of an estimate against ground truth", formatter_class=fmt)
    p.add_argument("--run", default=None, help="recompute the metrics of a run directory")
    p.add_argument("--xhat", default=None, help="estimate file")
    p.add_argument("--truth", default=None, help="ground-truth feature file")
    p.add_argument("--ks", default="10,20,50", help="comma-separated k values")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")

    p = sub.add_parser("classify", help="downstream node classification on estimates", formatter_class=fmt)
    p.add_argument("--xhat", required=True, help="estimate file")
    p.add_argument("--labels", required=True, help="label file")
    p.add_argument("--edges", default=None, help="edge list, required for gcn")
    p.add_argument("--classifier", choices=("mlp", "gcn"), default="mlp", help="classifier")
    p.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    p.add_argument("--seed", type=int, default=0, help="fold/initialization seed")

    p = sub.add_parser("ablate", help="train det, noreg and stoch on one split", formatter_class=fmt)
    _data_args(p)
    _train_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("grid", help="search the default hyperparameter grid", formatter_class=fmt)
    _data_args(p)
    _train_args(p)
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("bench", help="inference time against edge count", formatter_class=fmt)
    p.add_argument("--edges", required=True, help="edge list")
    p.add_argument("--features", required=True, help="feature file (for n and m)")
    p.add_argument("--dim", type=int, default=256, help="latent size d")
    p.add_argument("--repeats", type=int, default=10, help="timed passes per subgraph")
    p.add_argument("--seed", type=int, default=0, help="subsampling seed")
    p.add_argument("--run", default=None, help="time a trained checkpoint instead of random weights")
    p.add_argument("--out", default=None, help="write the result as JSON here")
    return parser


def config_from_args(a) -> TrainConfig:
    return TrainConfig(
        d=a.dim,
        dropout=a.dropout,
        lam=a.lam,
        beta=a.beta,
        alpha_logdet=a.alpha_logdet,
        lr=a.lr,
        max_epochs=a.epochs,
        patience=a.patience,
        variant=a.variant,
        unit_norm=a.unit_norm,
        r=a.rank,
        seed=a.seed,
        val_metric=a.val_metric,
        reduction=a.reduction,
        dtype="float32" if a.float32 else "float64",
    )


def _load(a):
    ds = load_dataset(a.edges, a.features, getattr(a, "labels", None))
    masks = make_splits(ds.graph.n, seed=a.split_seed)
    ratio = getattr(a, "label_ratio", 0.0)
    if ratio:
        if ds.labels is None:
            raise UsageError("--label-ratio needs --labels")
        masks = masks.with_labels(sample_label_mask(ds.graph.n, ratio, seed=a.split_seed))
    return ds, masks


def _nodes(masks, which, n):
    return {"train": masks.feat_train, "val": masks.feat_val, "test": masks.feat_test}.get(which, np.arange(n))


def _scores(xhat, kind):
    # binary estimates are written as probabilities
    return 1.0 / (1.0 + np.exp(-xhat)) if kind == "binary" else xhat


def write_estimate(xhat, nodes, path):
    write_features(FeatureTable(np.asarray(xhat, dtype=float), "continuous"), path, layout="dense")
    Path(str(path) + ".nodes").write_text("".join(f"{i}\n" for i in nodes), encoding="utf-8")


def read_estimate(path):
    x = read_features(path).values
    side = Path(str(path) + ".nodes")
    nodes = np.loadtxt(side, dtype=np.int64, ndmin=1) if side.exists() else np.arange(x.shape[0])
    return x, nodes


def run_report(trainer: Trainer, params, meta, ks=(10, 20, 50)) -> mt.MetricsReport:
    out = {}
    for split in ("val", "test"):
        nodes = getattr(trainer.masks, f"feat_{split}")
        out[split] = mt.evaluate(trainer.predict(params, nodes), trainer.x[nodes], None, trainer.kind, ks)
    return mt.MetricsReport(out, meta)


def _run_meta(a, cfg, ds):
    return {
        "dataset": ds.name,
        "seed": cfg.seed,
        "split_seed": a.split_seed,
        "label_ratio": a.label_ratio,
        "config_hash": cfg.hash(),
    }


def write_run(out, a, cfg, ds, masks):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = {
        "command": "train",
        "edges": str(Path(a.edges).resolve()),
        "features": str(Path(a.features).resolve()),
        "labels": str(Path(a.labels).resolve()) if a.labels else None,
        "split_seed": a.split_seed,
        "label_ratio": a.label_ratio,
        "train_config": cfg.to_dict(),
        "config_hash": cfg.hash(),
    }
    (out / "config").write_text(json.dumps(resolved, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    t0 = time.perf_counter()
    trainer = Trainer(ds, masks, cfg)
    params, tlog = trainer.fit()
    mdl.save_checkpoint(params, out / "checkpoint")
    tlog.save(out / "trainlog")
    report = run_report(trainer, params, _run_meta(a, cfg, ds))
    report.save(out / "metrics")
    log.info("trained in %.1fs, best epoch %d", time.perf_counter() - t0, tlog.best_epoch)
    if getattr(a, "write_xhat", False):
        nodes = masks.feat_test
        write_estimate(_scores(trainer.predict(params, nodes), trainer.kind), nodes, out / "xhat")
    return trainer, params, tlog, report


def cmd_train(a):
    cfg = config_from_args(a)
    if cfg.variant == "noreg" and a.lam != 0:
        print("warning: --lambda is ignored by --variant noreg", file=sys.stderr)
    ds, masks = _load(a)
    _, _, _, report = write_run(a.out, a, cfg, ds, masks)
    print(report.to_json(), end="")


def _trainer_from_run(run):
    run = Path(run)
    conf = json.loads((run / "config").read_text(encoding="utf-8"))
    ds = load_dataset(conf["edges"], conf["features"], conf["labels"])
    masks = make_splits(ds.graph.n, seed=conf["split_seed"])
    if conf["label_ratio"]:
        masks = masks.with_labels(sample_label_mask(ds.graph.n, conf["label_ratio"], seed=conf["split_seed"]))
    cfg = TrainConfig(**{**conf["train_config"], "track": tuple(conf["train_config"]["track"])})
    return Trainer(ds, masks, cfg), mdl.load_checkpoint(run / "checkpoint"), conf, ds


def cmd_estimate(a):
    if a.method == "svga":
        if not a.run:
            raise UsageError("--method svga needs --run")
        trainer, params, _, ds = _trainer_from_run(a.run)
        nodes = _nodes(trainer.masks, a.nodes, ds.graph.n)
        xhat = _scores(trainer.predict(params, nodes), trainer.kind)
    else:
        ds = load_dataset(a.edges, a.features)
        masks = make_splits(ds.graph.n, seed=a.split_seed)
        nodes = _nodes(masks, a.nodes, ds.graph.n)
        xhat = neigh_agg(ds.graph, ds.features.values, masks.feat_train, hops=a.hops)[nodes]
    write_estimate(xhat, nodes, a.out)


def cmd_evaluate(a):
    ks = tuple(int(k) for k in a.ks.split(","))
    if a.run:
        trainer, params, conf, ds = _trainer_from_run(a.run)
        meta = {
            "dataset": ds.name,
            "seed": trainer.config.seed,
            "split_seed": conf["split_seed"],
            "label_ratio": conf["label_ratio"],
            "config_hash": trainer.config.hash(),
        }
        report = run_report(trainer, params, meta, ks)
    else:
        if not (a.xhat and a.truth):
            raise UsageError("evaluate needs --run or both --xhat and --truth")
        xhat, nodes = read_estimate(a.xhat)
        truth = read_features(a.truth)
        metrics = mt.evaluate(xhat, truth.values[nodes], None, truth.kind, ks)
        report = mt.MetricsReport({"estimate": metrics}, {"xhat": str(a.xhat), "nodes": int(len(nodes))})
    if a.out:
        report.save(a.out)
    else:
        print(report.to_json(), end="")


def cmd_classify(a):
    xhat, nodes = read_estimate(a.xhat)
    all_labels = read_labels(a.labels)
    if len(nodes) and nodes.max() >= len(all_labels):
        all_labels = np.concatenate([all_labels, -np.ones(nodes.max() + 1 - len(all_labels), dtype=np.int64)])
    labels = all_labels[nodes]
    keep = labels >= 0
    graph = None
    if a.classifier == "gcn":
        if not a.edges:
            raise UsageError("--classifier gcn needs --edges")
        g0 = read_edge_list(a.edges)
        if len(nodes) and nodes.max() >= g0.n:
            g0 = build_graph(g0.edges, int(nodes.max()) + 1)
        graph = g0.subgraph(nodes[keep])
    try:
        acc = downstream_classify(xhat[keep], labels[keep], graph, a.classifier, a.folds, a.seed)
    except SingleClassError:
        print(json.dumps({"accuracy": "n/a", "reason": "single class"}))
        return
    print(json.dumps({"accuracy": acc, "classifier": a.classifier, "folds": a.folds}, sort_keys=True))


def cmd_ablate(a):
    cfg = config_from_args(a)
    ds, masks = _load(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for variant, (params, tlog, trainer) in run_ablation(ds, masks, cfg).items():
        vdir = out / variant
        vdir.mkdir(exist_ok=True)
        mdl.save_checkpoint(params, vdir / "checkpoint")
        tlog.save(vdir / "trainlog")
        best = tlog.records[tlog.best_epoch - 1]
        summary[variant] = {
            "best_epoch": tlog.best_epoch,
            "train_metric": best["train_metric"],
            "val_metric": best["val_metric"],
            "test_metric": best["test_metric"],
        }
    (out / "ablation.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary, sort_keys=True, indent=2))


def cmd_grid(a):
    cfg = config_from_args(a)
    ds, masks = _load(a)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    best, results = grid_search(ds, masks, cfg, SEARCH_GRID, workers=a.workers)
    with open(out / "grid.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for c, val, epoch in results:
            fh.write(json.dumps({"config": c.to_dict(), "best_val": val, "best_epoch": epoch}, sort_keys=True) + "\n")
    (out / "best_config.json").write_text(json.dumps(best.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(best.to_dict(), sort_keys=True, indent=2))


def cmd_bench(a):
    feats = read_features(a.features)
    n, m = feats.shape
    graph = read_edge_list(a.edges, n=n)
    if a.run:
        _, params, conf, _ = _trainer_from_run(a.run)
        cfg = TrainConfig(**{**conf["train_config"], "track": ()})
    else:
        cfg = TrainConfig(d=a.dim, dropout=0.0)
        params = mdl.init_params(n, a.dim, m, 0, "det", a.seed)
    res = bn.run_bench(graph, params, cfg, repeats=a.repeats, seed=a.seed)
    out = {"rows": res.rows(), "slope": res.slope, "intercept": res.intercept, "r2": res.r2}
    text = json.dumps(out, indent=2)
    if a.out:
        Path(a.out).write_text(text + "\n", encoding="utf-8")
    print(text)


COMMANDS = {
    "train": cmd_train,
    "estimate": cmd_estimate,
    "evaluate": cmd_evaluate,
    "classify": cmd_classify,
    "ablate": cmd_ablate,
    "grid": cmd_grid,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        COMMANDS[a.command](a)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, (DataError, GraphError)):
            print(f"data error: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
