"""Dataset files, split masks and label-observation masks.

Feature file::

    n<TAB>m<TAB>kind
    dense            # then n lines of m whitespace-separated values
    sparse           # or: one ``i<TAB>j<TAB>value`` line per nonzero

Label file: one ``i<TAB>class`` line per labelled node.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphError, build_graph, read_edge_list, write_edge_list

KINDS = ("binary", "continuous", "categorical")


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureTable:
    values: np.ndarray
    kind: str = "binary"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown feature kind {self.kind!r}")
        if self.kind == "binary" and not np.all((self.values == 0) | (self.values == 1)):
            raise DataError("binary features must be 0 or 1")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Dataset:
    graph: Graph
    features: FeatureTable
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        if self.features.shape[0] != self.graph.n:
            raise DataError(f"{self.features.shape[0]} feature rows for {self.graph.n} nodes")
        if self.labels is not None and len(self.labels) != self.graph.n:
            raise DataError(f"{len(self.labels)} labels for {self.graph.n} nodes")

    @property
    def num_classes(self) -> int:
        return 0 if self.labels is None else int(self.labels.max()) + 1


@dataclass(frozen=True)
class SplitMasks:
    """Node index arrays. ``label_observed`` may overlap any feature split."""

    feat_train: np.ndarray
    feat_val: np.ndarray
    feat_test: np.ndarray
    label_observed: np.ndarray

    def with_labels(self, label_observed) -> "SplitMasks":
        return SplitMasks(self.feat_train, self.feat_val, self.feat_test, np.asarray(label_observed, dtype=np.int64))


def _fmt(v: float, kind: str) -> str:
    if kind != "continuous" and float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def write_features(table: FeatureTable, path, layout: str | None = None) -> None:
    """Write ``table``; ``layout`` defaults to sparse for binary, dense otherwise."""
    x = table.values
    n, m = x.shape
    layout = layout or ("sparse" if table.kind == "binary" else "dense")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{n}\t{m}\t{table.kind}\n{layout}\n")
        if layout == "dense":
            for row in x:
                fh.write(" ".join(_fmt(v, table.kind) for v in row) + "\n")
        elif layout == "sparse":
            for i, j in zip(*np.nonzero(x)):
                fh.write(f"{i}\t{j}\t{_fmt(x[i, j], table.kind)}\n")
        else:
            raise DataError(f"unknown layout {layout!r}")


def read_features(path) -> FeatureTable:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]

    def fail(lineno, msg):
        raise DataError(f"{path}:{lineno}: {msg}")

    if not lines:
        fail(1, "empty feature file")
    head = lines[0].split("\t")
    if len(head) != 3:
        fail(1, f"expected header 'n<TAB>m<TAB>kind', got {lines[0]!r}")
    try:
        n, m = int(head[0]), int(head[1])
    except ValueError:
        fail(1, f"non-integer sizes in header {lines[0]!r}")
    kind = head[2]
    if kind not in KINDS or n <= 0 or m <= 0:
        fail(1, f"invalid header {lines[0]!r}")
    layout = lines[1].strip() if len(lines) > 1 else ""
    x = np.zeros((n, m))
    body = [(k + 3, ln) for k, ln in enumerate(lines[2:]) if ln.strip()]
    if layout == "dense":
        if len(body) != n:
            fail(len(lines), f"expected {n} dense rows, found {len(body)}")
        for i, (lineno, ln) in enumerate(body):
            parts = ln.split()
            if len(parts) != m:
                fail(lineno, f"expected {m} values, found {len(parts)}")
            try:
                x[i] = [float(p) for p in parts]
            except ValueError:
                fail(lineno, "non-numeric value")
    elif layout == "sparse":
        for lineno, ln in body:
            parts = ln.split("\t")
            if len(parts) != 3:
                fail(lineno, f"expected 'i<TAB>j<TAB>value', got {ln!r}")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                fail(lineno, f"malformed triplet {ln!r}")
            if not (0 <= i < n and 0 <= j < m):
                fail(lineno, f"index ({i}, {j}) outside {n}x{m}")
            x[i, j] = v
    else:
        fail(2, f"expected 'dense' or 'sparse', got {layout!r}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{path}: non-finite feature values")
    if kind == "binary" and not np.all((x == 0) | (x == 1)):
        bad = np.argwhere((x != 0) & (x != 1))[0]
        raise DataError(f"{path}: non-binary value {x[tuple(bad)]} at {tuple(bad)} under kind=binary")
    return FeatureTable(x, kind)


def write_labels(labels, path, nodes=None) -> None:
    labels = np.asarray(labels)
    nodes = range(len(labels)) if nodes is None else nodes
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in nodes:
            fh.write(f"{i}\t{int(labels[i])}\n")


def read_labels(path, n: int | None = None) -> np.ndarray:
    """Labels as an int array of length ``n``; unlabelled nodes get ``-1``.

    ``n`` defaults to the largest node id in the file plus one.
    """
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            try:
                i, c = int(parts[0]), int(parts[1])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: expected 'i<TAB>class', got {line!r}") from None
            if len(parts) != 2 or i < 0 or c < 0 or (n is not None and i >= n):
                raise DataError(f"{path}:{lineno}: invalid label line {line!r}")
            pairs.append((i, c))
    if n is None:
        n = max((i for i, _ in pairs), default=-1) + 1
    out = -np.ones(n, dtype=np.int64)
    for i, c in pairs:
        out[i] = c
    return out


def load_dataset(edges_path, features_path, labels_path=None, name=None) -> Dataset:
    features = read_features(features_path)
    n = features.shape[0]
    try:
        graph = read_edge_list(edges_path, n=n)
    except GraphError as exc:
        raise DataError(str(exc)) from None
    labels = read_labels(labels_path, n) if labels_path else None
    return Dataset(graph, features, labels, name or Path(features_path).stem)


def save_dataset(ds: Dataset, directory) -> dict:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"edges": directory / "edges.tsv", "features": directory / "features.txt"}
    write_edge_list(ds.graph, paths["edges"])
    write_features(ds.features, paths["features"])
    if ds.labels is not None:
        paths["labels"] = directory / "labels.tsv"
        write_labels(ds.labels, paths["labels"], np.flatnonzero(ds.labels >= 0))
    return paths


def split_sizes(n: int, ratio=(4, 1, 5)) -> tuple[int, int, int]:
    """Train share rounded up, validation share rounded half-up, test gets the rest.

    ``n = 2708`` gives ``(1084, 271, 1353)``.
    """
    total = sum(ratio)
    n_train = -(-n * ratio[0] // total)
    n_val = (2 * n * ratio[1] + total) // (2 * total)
    return n_train, n_val, n - n_train - n_val


def make_splits(n: int, ratio=(4, 1, 5), seed=0) -> SplitMasks:
    if n < 10:
        raise DataError(f"need at least 10 nodes to split, got {n}")
    n_train, n_val, _ = split_sizes(n, ratio)
    perm = np.random.default_rng(seed).permutation(n)
    return SplitMasks(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train : n_train + n_val]),
        np.sort(perm[n_train + n_val :]),
        np.zeros(0, dtype=np.int64),
    )


def sample_label_mask(n: int, ratio: float, seed=0) -> np.ndarray:
    """``floor(ratio * n)`` nodes drawn uniformly from all nodes."""
    if not 0.0 <= ratio <= 1.0:
        raise DataError(f"label ratio must be in [0, 1], got {ratio}")
    size = int(np.floor(ratio * n))
    return np.sort(np.random.default_rng(seed).choice(n, size=size, replace=False))


def from_arrays(edges, x, kind="binary", labels=None, name="dataset") -> Dataset:
    x = np.asarray(x, dtype=float)
    return Dataset(build_graph(edges, x.shape[0]), FeatureTable(x, kind), None if labels is None else np.asarray(labels), name)
