"""Full-batch Adam training with early stopping on a validation metric.

Three variants share one loop: ``det`` (deterministic encoder with the GMRF
regularizer), ``noreg`` (same encoder, no regularizer) and ``stoch``
(two-head encoder, reparametrized sampling and the structured KL term).

Randomness comes from one ``SeedSequence`` per run, split into independent
streams for initialization, dropout and sampling so that switching one of
them off does not shift the others. With BLAS threading the results are
reproducible for a fixed thread count.
"""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from . import metrics as mt
from . import model as mdl
from .data import Dataset, SplitMasks
from .graph import gmrf_information_matrix, normalized_adjacency
from .objective import Batch, total_objective, zero_ratio

log = logging.getLogger(__name__)

VARIANTS = ("det", "noreg", "stoch")

# search space used by grid_search
SEARCH_GRID = {
    "d": (256, 512),
    "dropout": (0.0, 0.5),
    "lam": (0.01, 0.1, 1.0),
    "beta": (0.01, 0.1, 1.0),
    "unit_norm": (True, False),
}


@dataclass
class TrainConfig:
    d: int = 256
    dropout: float = 0.5
    lam: float = 1.0
    beta: float = 1.0
    alpha_logdet: float = 0.5
    lr: float = 0.001
    max_epochs: int = 2000
    patience: int = 100
    variant: str = "det"
    unit_norm: bool = True
    r: int | None = None
    seed: int = 0
    val_metric: str | None = None
    reduction: str = "sum"
    dtype: str = "float64"
    # extra metrics logged per epoch on these splits, e.g. ("train", "test")
    track: tuple = ()

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.reduction not in ("sum", "mean"):
            raise ValueError("reduction must be 'sum' or 'mean'")

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["track"] = list(self.track)
        return out

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


def default_val_metric(kind: str) -> str:
    return {"binary": "recall@10", "continuous": "neg_rmse", "categorical": "accuracy"}[kind]


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


class TrainingAborted(la.NumericalError):
    def __init__(self, epoch, reason):
        super().__init__(f"epoch {epoch}: {reason}")
        self.epoch = epoch


@dataclass
class TrainLog:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    best_val: float = float("-inf")
    stopped_early: bool = False

    def to_jsonl(self, include_time=True) -> str:
        lines = []
        for rec in self.records:
            rec = rec if include_time else {k: v for k, v in rec.items() if k != "wall_ms"}
            lines.append(json.dumps(rec, sort_keys=True))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())

    def column(self, key):
        return np.array([r[key] for r in self.records])


def run_streams(seed):
    """Independent generators for init, dropout, sampling and folds."""
    return dict(zip(("init", "dropout", "sampling", "folds"), (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))))


def _labelled(nodes, labels):
    if labels is None or nodes is None or len(nodes) == 0:
        return np.zeros(0, dtype=np.int64)
    nodes = np.asarray(nodes)
    return nodes[labels[nodes] >= 0]


class Trainer:
    """Holds the derived matrices and training targets of one run."""

    def __init__(self, dataset: Dataset, masks: SplitMasks, config: TrainConfig):
        self.dataset = dataset
        self.masks = masks
        self.config = config
        dtype = np.dtype(config.dtype)
        self.dtype = dtype
        self.adj = normalized_adjacency(dataset.graph).astype(dtype)
        self.prior = gmrf_information_matrix(dataset.graph).astype(dtype)
        x = dataset.features.values.astype(dtype)
        self.x = x
        self.kind = dataset.features.kind
        train = np.asarray(masks.feat_train)
        if len(train) == 0:
            raise ValueError("no training nodes with observed features")
        label_nodes = _labelled(masks.label_observed, dataset.labels)
        self.num_classes = dataset.num_classes
        self.batch = Batch(
            feat_nodes=train,
            x=x[train],
            kind=self.kind,
            alpha_ber=zero_ratio(x[train]) if self.kind == "binary" else 0.5,
            label_nodes=label_nodes,
            labels=None if dataset.labels is None else dataset.labels[label_nodes],
        )
        self.val_metric = config.val_metric or default_val_metric(self.kind)
        self.streams = run_streams(config.seed)

    def init_params(self):
        n, m = self.x.shape
        return mdl.init_params(n, self.config.d, m, self.num_classes, self.config.variant, self.streams["init"], self.dtype)

    def forward(self, params, training):
        cfg = self.config
        if cfg.variant == "stoch":
            if training:
                return mdl.encode_stochastic(params, self.adj, cfg, True, self.streams["dropout"], self.streams["sampling"])
            # evaluation uses the mean, as the decoder estimate of E[x | U]
            u, cache = mdl._head(params, self.adj, cfg.dropout, cfg.unit_norm, False, None)
            return mdl.ForwardState(e=u, z=u, cache={"mu": cache})
        return mdl.encode(params, self.adj, cfg, training, self.streams["dropout"])

    def predict(self, params, nodes=None):
        """Feature estimates (decoder logits) for ``nodes`` (all nodes by default)."""
        z = self.forward(params, training=False).z
        return mdl.decode_features(params, z if nodes is None else z[nodes])

    def score(self, params, nodes, metric=None):
        nodes = np.asarray(nodes)
        return mt.metric_value(metric or self.val_metric, self.predict(params, nodes), self.x[nodes], None)

    def step(self, params, adam):
        state = self.forward(params, training=True)
        losses, grads = total_objective(params, state, self.batch, self.adj, self.prior, self.config)
        if not np.isfinite(losses.total):
            raise TrainingAborted(adam.step + 1, f"non-finite loss {losses.total}")
        adam_step(params, grads, adam, self.config.lr)
        return losses

    def fit(self):
        cfg = self.config
        params = self.init_params()
        adam = AdamState()
        tlog = TrainLog()
        best = copy.deepcopy(params)
        since_best = 0
        splits = {"train": self.masks.feat_train, "val": self.masks.feat_val, "test": self.masks.feat_test}
        for epoch in range(1, cfg.max_epochs + 1):
            t0 = time.perf_counter()
            try:
                losses = self.step(params, adam)
                z = self.forward(params, training=False).z
            except la.NumericalError as exc:
                if isinstance(exc, TrainingAborted):
                    raise
                raise TrainingAborted(epoch, str(exc)) from exc
            val_nodes = splits["val"]
            val = mt.metric_value(self.val_metric, mdl.decode_features(params, z[val_nodes]), self.x[val_nodes], None)
            rec = {
                "epoch": epoch,
                "l_x": losses.l_x,
                "l_y": losses.l_y,
                "l_reg": losses.l_reg,
                "total": losses.total,
                "val_metric": val,
            }
            for name in cfg.track:
                nodes = splits[name]
                rec[f"{name}_metric"] = mt.metric_value(self.val_metric, mdl.decode_features(params, z[nodes]), self.x[nodes], None)
            rec["wall_ms"] = (time.perf_counter() - t0) * 1e3
            tlog.records.append(rec)
            if val > tlog.best_val:
                tlog.best_val, tlog.best_epoch = val, epoch
                best = copy.deepcopy(params)
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    tlog.stopped_early = True
                    break
        log.info("best epoch %d, %s=%.4f", tlog.best_epoch, self.val_metric, tlog.best_val)
        return best, tlog


def train(dataset: Dataset, masks: SplitMasks, config: TrainConfig):
    """Train one model; returns ``(best_params, TrainLog)``."""
    return Trainer(dataset, masks, config).fit()


def run_ablation(dataset: Dataset, masks: SplitMasks, base_config: TrainConfig) -> dict:
    """Train ``det``, ``noreg`` and ``stoch`` with the same seed and split.

    Returns ``{variant: (params, TrainLog, Trainer)}``; every log carries
    per-epoch train and test metrics.
    """
    out = {}
    for variant in VARIANTS:
        cfg = base_config.replace(variant=variant, track=("train", "test"))
        trainer = Trainer(dataset, masks, cfg)
        params, tlog = trainer.fit()
        out[variant] = (params, tlog, trainer)
    return out


def grid_configs(base: TrainConfig, grid: dict | None = None):
    grid = SEARCH_GRID if grid is None else grid
    keys = sorted(grid)
    for values in itertools.product(*(grid[k] for k in keys)):
        yield base.replace(**dict(zip(keys, values)))


def _grid_job(args):
    dataset, masks, cfg = args
    _, tlog = train(dataset, masks, cfg)
    return cfg, tlog.best_val, tlog.best_epoch


def grid_search(dataset: Dataset, masks: SplitMasks, base: TrainConfig, grid: dict | None = None, workers: int = 1):
    """Train every configuration in ``grid`` and pick the best by validation score.

    Returns ``(best_config, results)`` where ``results`` lists
    ``(config, best_val, best_epoch)`` in grid order.
    """
    jobs = [(dataset, masks, cfg) for cfg in grid_configs(base, grid)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_grid_job, jobs))
    else:
        results = [_grid_job(j) for j in jobs]
    best = max(results, key=lambda r: r[1])
    return best[0], results
