"""Estimation-quality metrics for binary and continuous features.

Ranking metrics treat each nonzero entry of a binary row as a relevant item
and rank features by descending score, breaking ties by ascending feature
index. Rows without any nonzero entry are skipped.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


def _select(a, nodes):
    a = np.asarray(a)
    return a if nodes is None else a[np.asarray(nodes)]


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores per row, ties to the lower index."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    order = np.argsort(-scores, axis=1, kind="stable")
    return order[:, :k]


def _hits(xhat, x, k):
    top = top_k(xhat, k)
    hits = np.take_along_axis(x, top, axis=1) != 0
    n_true = np.count_nonzero(x, axis=1)
    return hits, n_true


def recall_at_k(xhat, x_true, nodes=None, k=10, return_skipped=False):
    """Mean over nodes of the share of true entries found in the top ``k``."""
    xhat, x = _select(xhat, nodes), _select(x_true, nodes)
    hits, n_true = _hits(xhat, x, k)
    keep = n_true > 0
    vals = hits[keep].sum(axis=1) / n_true[keep]
    value = float(vals.mean()) if keep.any() else float("nan")
    return (value, int((~keep).sum())) if return_skipped else value


def ndcg_at_k(xhat, x_true, nodes=None, k=10, return_skipped=False):
    """DCG@k over the ideal DCG with ``min(k, |x|_0)`` relevant positions."""
    xhat, x = _select(xhat, nodes), _select(x_true, nodes)
    hits, n_true = _hits(xhat, x, k)
    discounts = 1.0 / np.log2(np.arange(2, hits.shape[1] + 2))
    # same summation order as the ideal DCG, so a perfect ranking gives exactly 1
    dcg = np.cumsum(hits * discounts, axis=1)[:, -1]
    ideal_cum = np.concatenate([[0.0], np.cumsum(discounts)])
    keep = n_true > 0
    idcg = ideal_cum[np.minimum(k, n_true[keep])]
    vals = dcg[keep] / idcg
    value = float(vals.mean()) if keep.any() else float("nan")
    return (value, int((~keep).sum())) if return_skipped else value


def rmse(xhat, x_true, nodes=None) -> float:
    """Per-node root-mean-square error, averaged over nodes."""
    xhat, x = _select(xhat, nodes), _select(x_true, nodes)
    if x.shape[0] == 0:
        raise ValueError("no nodes to evaluate")
    return float(np.mean(np.sqrt(np.mean((xhat - x) ** 2, axis=1))))


def corr(xhat, x_true, nodes=None, return_skipped=False):
    """Mean over features of ``1 - SSE/SST``, centering on the evaluated nodes.

    Features whose SST is below 1e-12 are skipped.
    """
    xhat, x = _select(xhat, nodes), _select(x_true, nodes)
    if x.shape[0] == 0:
        raise ValueError("no nodes to evaluate")
    sse = np.sum((xhat - x) ** 2, axis=0)
    sst = np.sum((x - x.mean(axis=0)) ** 2, axis=0)
    keep = sst >= 1e-12
    value = float(np.mean(1.0 - sse[keep] / sst[keep])) if keep.any() else float("nan")
    return (value, int((~keep).sum())) if return_skipped else value


def accuracy(xhat, x_true, nodes=None) -> float:
    """Argmax agreement, used for categorical features."""
    xhat, x = _select(xhat, nodes), _select(x_true, nodes)
    return float(np.mean(np.argmax(xhat, axis=1) == np.argmax(x, axis=1)))


def evaluate(xhat, x_true, nodes, kind, ks=(10, 20, 50)) -> dict:
    """All metrics appropriate for ``kind`` plus skip counts."""
    out = {}
    if kind == "binary":
        for k in ks:
            out[f"recall@{k}"], skipped = recall_at_k(xhat, x_true, nodes, k, return_skipped=True)
            out[f"ndcg@{k}"] = ndcg_at_k(xhat, x_true, nodes, k)
        out["skipped_nodes"] = skipped
    elif kind == "continuous":
        out["rmse"] = rmse(xhat, x_true, nodes)
        out["corr"], out["skipped_features"] = corr(xhat, x_true, nodes, return_skipped=True)
    else:
        out["accuracy"] = accuracy(xhat, x_true, nodes)
    return out


def metric_value(name: str, xhat, x_true, nodes) -> float:
    """A single higher-is-better score: ``recall@k``, ``ndcg@k``, ``neg_rmse``, ``corr`` or ``accuracy``."""
    if name.startswith("recall@"):
        return recall_at_k(xhat, x_true, nodes, int(name[7:]))
    if name.startswith("ndcg@"):
        return ndcg_at_k(xhat, x_true, nodes, int(name[5:]))
    if name == "neg_rmse":
        return -rmse(xhat, x_true, nodes)
    if name == "corr":
        return corr(xhat, x_true, nodes)
    if name == "accuracy":
        return accuracy(xhat, x_true, nodes)
    raise ValueError(f"unknown metric {name!r}")


@dataclass
class MetricsReport:
    """Metric values per split plus run metadata, written as key-sorted JSON."""

    metrics: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"meta": self.meta, "metrics": self.metrics}, sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "MetricsReport":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(raw["metrics"], raw.get("meta", {}))
