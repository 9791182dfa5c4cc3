"""Converter for the Planetoid citation datasets (``ind.<name>.*`` files).

Not part of the core API: it turns the public Cora/Citeseer/Pubmed files
into a :class:`~svga.data.Dataset`, which ``save_dataset`` can then write
in the package's own file formats.
"""
from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import Dataset, FeatureTable
from .graph import build_graph

PARTS = ("x", "tx", "allx", "y", "ty", "ally", "graph")


def _load(path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _dense(a):
    return a.toarray() if sp.issparse(a) else np.asarray(a)


def available(root, name) -> bool:
    root = Path(root)
    return all((root / f"ind.{name}.{p}").exists() for p in PARTS + ("test.index",))


def load_planetoid(root, name: str) -> Dataset:
    """Read ``ind.<name>.*`` from ``root``.

    Test nodes missing from the Citeseer graph are kept as isolated nodes
    with zero features and label ``-1``, as in the reference loaders.
    """
    root = Path(root)
    raw = {p: _load(root / f"ind.{name}.{p}") for p in PARTS}
    test_index = np.loadtxt(root / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_index)
    allx, tx = _dense(raw["allx"]), _dense(raw["tx"])
    ally, ty = np.asarray(raw["ally"]), np.asarray(raw["ty"])
    if name.lower() == "citeseer":
        span = int(test_index.max() - test_index.min()) + 1
        tx_ext = np.zeros((span, tx.shape[1]))
        tx_ext[test_sorted - test_index.min()] = tx
        ty_ext = np.zeros((span, ty.shape[1]))
        ty_ext[test_sorted - test_index.min()] = ty
        tx, ty = tx_ext, ty_ext
    x = np.vstack([allx, tx])
    y = np.vstack([ally, ty])
    x[test_index] = x[test_sorted]
    y[test_index] = y[test_sorted]
    labels = np.where(y.sum(axis=1) > 0, y.argmax(axis=1), -1)
    n = x.shape[0]
    edges = [(u, v) for u, nbrs in raw["graph"].items() for v in nbrs if u < n and v < n]
    graph = build_graph(edges, n)
    kind = "binary" if np.all((x == 0) | (x == 1)) else "continuous"
    return Dataset(graph, FeatureTable(x, kind), labels.astype(np.int64), name)
