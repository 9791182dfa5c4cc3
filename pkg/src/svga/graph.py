"""Undirected graph storage and the two matrices derived from it.

``normalized_adjacency`` is the propagation matrix of the GCN encoder and
``gmrf_information_matrix`` is the precision matrix of the GMRF prior over
latent node variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with unit edge weights.

    ``edges`` holds each undirected edge once as ``(u, v)`` with ``u < v``;
    ``csr`` stores both directions.
    """

    n: int
    edges: np.ndarray
    csr: sp.csr_matrix = field(repr=False)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    def subgraph(self, nodes) -> "Graph":
        """Induced subgraph on ``nodes``, relabelled to ``0..len(nodes)-1``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = -np.ones(self.n, dtype=np.int64)
        remap[nodes] = np.arange(len(nodes))
        keep = (remap[self.edges[:, 0]] >= 0) & (remap[self.edges[:, 1]] >= 0)
        return build_graph(remap[self.edges[keep]], len(nodes))


def build_graph(edge_list, n: int) -> Graph:
    """Deduplicate, drop self-loops and symmetrize ``edge_list``."""
    if n <= 0:
        raise GraphError(f"node count must be positive, got {n}")
    e = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise GraphError(f"edge {tuple(bad)} has a node id outside [0, {n})")
    e = e[e[:, 0] != e[:, 1]]
    e = np.sort(e, axis=1)
    e = np.unique(e, axis=0) if len(e) else e
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    csr = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    csr.sort_indices()
    return Graph(n=n, edges=e, csr=csr)


def normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """``D~^-1/2 (A + I) D~^-1/2`` with ``D~`` the degrees of ``A + I``."""
    a = g.csr + sp.identity(g.n, format="csr")
    inv_sqrt = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    d = sp.diags(inv_sqrt)
    out = (d @ a @ d).tocsr()
    out.sort_indices()
    return out


def gmrf_information_matrix(g: Graph) -> sp.csr_matrix:
    """Symmetrically normalized Laplacian ``I - D^-1/2 A D^-1/2``.

    Isolated nodes get an identity row: their ``D^-1/2`` entry is taken as 0.
    The mean parameter ``h`` of the prior is fixed at zero and not stored.
    """
    deg = g.degrees.astype(float)
    inv_sqrt = np.zeros(g.n)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    k = (sp.identity(g.n, format="csr") - d @ g.csr @ d).tocsr()
    k.sort_indices()
    return k


def gmrf_unnormalized_density(prior: sp.spmatrix, jitter: float, z) -> float:
    """Log of the product of node and edge potentials at ``z`` (``h = 0``).

    Node potential ``exp(-0.5 (K_ii + jitter) z_i^2)``, edge potential
    ``exp(-K_ij z_i z_j)`` once per undirected edge. The normalizing
    constant is never formed. Intended for checking the Gaussian form of the
    prior, not for training.
    """
    if jitter <= 0:
        raise ValueError("jitter must be positive")
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    k = sp.coo_matrix(prior)
    log_p = 0.0
    diag = k.diagonal()
    for i in range(k.shape[0]):
        log_p += -0.5 * (diag[i] + jitter) * z[i] ** 2
    for i, j, v in zip(k.row, k.col, k.data):
        if i < j:
            log_p += -v * z[i] * z[j]
    return log_p


def read_edge_list(path, n: int | None = None) -> Graph:
    """Read a tab-separated edge list; ``#`` lines are comments."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'u<TAB>v', got {line!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
    if n is None:
        n = max((max(p) for p in pairs), default=-1) + 1
    return build_graph(pairs, n)


def write_edge_list(g: Graph, path) -> None:
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
