"""Neighbor-mean feature estimation (NeighAgg)."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Graph


def neigh_agg(graph: Graph, features, observed, hops: int = 1) -> np.ndarray:
    """Mean of observed neighbors' feature rows, for every node.

    Nodes without an observed neighbor fall back to the mean of all
    observed rows. ``hops=2`` averages the one-hop estimates over neighbors
    once more.
    """
    x = np.asarray(features, dtype=float)
    observed = np.asarray(observed)
    if observed.dtype == bool:
        observed = np.flatnonzero(observed)
    if len(observed) == 0:
        raise ValueError("neigh_agg needs at least one observed node")
    if hops not in (1, 2):
        raise ValueError("hops must be 1 or 2")
    obs = np.zeros(graph.n)
    obs[observed] = 1.0
    a = graph.csr
    a_obs = a @ sp.diags(obs)
    counts = np.asarray(a_obs.sum(axis=1)).ravel()
    x_obs = np.zeros_like(x)
    x_obs[observed] = x[observed]
    sums = np.asarray(a_obs @ x_obs)
    out = np.empty_like(x)
    has = counts > 0
    out[has] = sums[has] / counts[has, None]
    out[~has] = x[observed].mean(axis=0)
    if hops == 2:
        deg = np.diff(a.indptr)
        nb = deg > 0
        twice = np.asarray(a @ out)
        out[nb] = twice[nb] / deg[nb, None]
    return out
