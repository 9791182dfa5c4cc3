"""Synthetic citation-like graphs with structure-dependent binary features.

Used by the demos and the test-suite when the public datasets are not on
disk. Nodes get a class, edges follow a homophilous block model, and each
node's bag of words is drawn from a topic vector smoothed over the graph,
so both the class and the neighborhood carry information about features.
"""
from __future__ import annotations

import numpy as np

from .data import Dataset, FeatureTable
from .graph import build_graph, normalized_adjacency


def citation_like(
    n=600,
    m=300,
    c=5,
    avg_degree=4.0,
    homophily=0.85,
    words_per_node=15,
    latent_dim=16,
    smoothing=2,
    sharpness=3.0,
    seed=0,
    kind="binary",
) -> Dataset:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, c, size=n)
    by_class = [np.flatnonzero(labels == k) for k in range(c)]
    num_edges = int(avg_degree * n / 2)
    src = rng.integers(0, n, size=num_edges)
    same = rng.random(num_edges) < homophily
    dst = np.where(same, -1, rng.integers(0, n, size=num_edges))
    for i in np.flatnonzero(same):
        pool = by_class[labels[src[i]]]
        dst[i] = pool[rng.integers(len(pool))]
    # a spanning path inside each class keeps nodes from being isolated
    chain = [(p[j], p[j + 1]) for p in by_class for j in range(len(p) - 1) if rng.random() < 0.5]
    edges = np.vstack([np.column_stack([src, dst]), np.array(chain, dtype=np.int64).reshape(-1, 2)])
    graph = build_graph(edges, n)

    centers = rng.normal(size=(c, latent_dim)) * 1.5
    h = centers[labels] + rng.normal(size=(n, latent_dim))
    adj = normalized_adjacency(graph)
    for _ in range(smoothing):
        h = adj @ h
    h /= np.linalg.norm(h, axis=1, keepdims=True) + 1e-12
    word_emb = rng.normal(size=(latent_dim, m))
    logits = sharpness * h @ word_emb
    if kind == "continuous":
        x = logits + 0.5 * rng.normal(size=logits.shape)
        return Dataset(graph, FeatureTable(x, "continuous"), labels, "synthetic")
    gumbel = -np.log(-np.log(rng.random((n, m))))
    top = np.argsort(-(logits + gumbel), axis=1)[:, :words_per_node]
    x = np.zeros((n, m))
    np.put_along_axis(x, top, 1.0, axis=1)
    return Dataset(graph, FeatureTable(x, "binary"), labels, "synthetic")
