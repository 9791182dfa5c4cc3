"""Downstream node classification on estimated features.

Both classifiers are two-layer networks (hidden 256, ReLU, dropout 0.5)
trained full-batch with Adam (lr 0.01, 200 epochs) and softmax
cross-entropy. The GCN variant propagates over the induced subgraph of the
evaluated nodes.
"""
from __future__ import annotations

import numpy as np

from . import linalg as la
from .graph import Graph, normalized_adjacency
from .trainer import AdamState, adam_step

HIDDEN = 256
DROPOUT = 0.5
LR = 0.01
EPOCHS = 200


class SingleClassError(ValueError):
    pass


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _forward(params, x, adj, training, rng):
    prop = (lambda t: la.spmm(adj, t)) if adj is not None else (lambda t: t)
    p1 = la.add_bias(prop(x @ params["W1"]), params["b1"])
    h = la.relu(p1)
    hd, mask = la.dropout(h, DROPOUT, training, rng)
    out = la.add_bias(prop(hd @ params["W2"]), params["b2"])
    return out, (p1, hd, mask)


def _backward(params, x, adj, cache, g_out):
    p1, hd, mask = cache
    back = (lambda t: la.spmm_backward(adj, t)) if adj is not None else (lambda t: t)
    g_q, g_b2 = la.add_bias_backward(g_out)
    g_q = back(g_q)
    g_hd, g_w2 = la.matmul_backward(hd, params["W2"], g_q)
    g_p1 = la.relu_backward(p1, la.dropout_backward(mask, g_hd))
    g_xw, g_b1 = la.add_bias_backward(g_p1)
    g_xw = back(g_xw)
    return {"W1": x.T @ g_xw, "b1": g_b1, "W2": g_w2, "b2": g_b2}


def fit_predict(x, y, train_idx, test_idx, num_classes, adj=None, seed=0, epochs=EPOCHS):
    """Train on ``train_idx`` and return predicted classes for ``test_idx``.

    With ``adj`` the model is transductive: propagation runs over all rows
    of ``x`` and only the loss is restricted to the training rows.
    """
    rng = np.random.default_rng(seed)
    f = x.shape[1]
    params = {
        "W1": _glorot(rng, f, HIDDEN),
        "b1": np.zeros(HIDDEN),
        "W2": _glorot(rng, HIDDEN, num_classes),
        "b2": np.zeros(num_classes),
    }
    if adj is None:
        x_fit, y_fit = x[train_idx], y[train_idx]
        rows = slice(None)
    else:
        x_fit, y_fit = x, y[train_idx]
        rows = train_idx
    adam = AdamState()
    for _ in range(epochs):
        out, cache = _forward(params, x_fit, adj, True, rng)
        logp = la.log_softmax_rows(out[rows])
        g = np.exp(logp)
        g[np.arange(len(y_fit)), y_fit] -= 1.0
        g /= len(y_fit)
        g_out = np.zeros_like(out)
        g_out[rows] = g
        adam_step(params, _backward(params, x_fit, adj, cache, g_out), adam, LR)
    if adj is None:
        out, _ = _forward(params, x[test_idx], None, False, None)
    else:
        out, _ = _forward(params, x, adj, False, None)
        out = out[test_idx]
    return np.argmax(out, axis=1)


def downstream_classify(features, labels, graph: Graph | None = None, classifier="mlp", folds=5, seed=0, epochs=EPOCHS) -> float:
    """Mean accuracy over a seeded ``folds``-fold split of the given nodes.

    ``features`` and ``labels`` are restricted to the evaluated nodes;
    ``graph``, required for ``classifier="gcn"``, is their induced subgraph.
    """
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClassError("node classification needs at least two classes")
    if classifier not in ("mlp", "gcn"):
        raise ValueError(f"unknown classifier {classifier!r}")
    if classifier == "gcn" and graph is None:
        raise ValueError("the gcn classifier needs a graph")
    num_classes = int(y.max()) + 1
    adj = normalized_adjacency(graph) if classifier == "gcn" else None
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(y))
    parts = np.array_split(perm, folds)
    accs = []
    for i, test_idx in enumerate(parts):
        train_idx = np.concatenate([p for j, p in enumerate(parts) if j != i])
        pred = fit_predict(x, y, train_idx, test_idx, num_classes, adj, seed=seed + i, epochs=epochs)
        accs.append(np.mean(pred == y[test_idx]))
    return float(np.mean(accs))
