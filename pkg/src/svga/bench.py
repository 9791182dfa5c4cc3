"""Inference time against edge count on random edge-subsampled graphs."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import model as mdl
from .graph import Graph, build_graph, normalized_adjacency

FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 10))


@dataclass
class BenchResult:
    edges: np.ndarray
    seconds: np.ndarray
    slope: float
    intercept: float
    r2: float

    def rows(self):
        return [{"edges": int(e), "seconds": float(s)} for e, s in zip(self.edges, self.seconds)]


def subsample_edges(g: Graph, fraction: float, rng) -> Graph:
    """Keep all nodes and a uniform random ``fraction`` of the edges."""
    k = int(round(fraction * g.num_edges))
    keep = rng.choice(g.num_edges, size=k, replace=False)
    return build_graph(g.edges[np.sort(keep)], g.n)


def linear_fit(x, y):
    """Least-squares line; returns ``(slope, intercept, r2)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    a = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - (slope * x + intercept)
    sst = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / sst if sst > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _forward(params, adj, config):
    return mdl.decode_features(params, mdl.encode(params, adj, config).z)


def time_inference(params, adj, config, repeats=10) -> float:
    """Median wall time of ``repeats`` full forward passes (encoder and feature decoder)."""
    return float(time_many(params, [adj], config, repeats)[0])


def time_many(params, adjs, config, repeats=10) -> np.ndarray:
    """Median forward time per adjacency.

    Passes run round-robin over ``adjs`` so that slow drift in machine load
    spreads evenly across graphs instead of biasing whichever ran last.
    """
    for adj in adjs:
        _forward(params, adj, config)
    times = np.zeros((repeats, len(adjs)))
    for r in range(repeats):
        for j, adj in enumerate(adjs):
            t0 = time.perf_counter()
            _forward(params, adj, config)
            times[r, j] = time.perf_counter() - t0
    return np.median(times, axis=0)


def run_bench(g: Graph, params, config, fractions=FRACTIONS, repeats=10, seed=0) -> BenchResult:
    rng = np.random.default_rng(seed)
    subs = [subsample_edges(g, f, rng) for f in fractions]
    edges = np.array([s.num_edges for s in subs])
    secs = time_many(params, [normalized_adjacency(s) for s in subs], config, repeats)
    slope, intercept, r2 = linear_fit(edges, secs)
    return BenchResult(edges, secs, slope, intercept, r2)
