"""
Inference cost against edge count
=================================

Inference touches every edge a constant number of times, so wall time
should grow linearly with the number of edges. We keep all nodes, keep
10%, 20%, ... 90% of the edges, time ten forward passes each and fit a
line.
"""

from svga import bench, model, TrainConfig
from svga.synthetic import citation_like

ds = citation_like(n=10000, m=100, avg_degree=40, seed=0)
config = TrainConfig(d=128, dropout=0.0)
params = model.init_params(ds.graph.n, config.d, ds.features.shape[1], 0, seed=0)

res = bench.run_bench(ds.graph, params, config, repeats=5)
for row in res.rows():
    print(f"{row['edges']:8d} edges  {1000 * row['seconds']:7.1f} ms")
print(f"slope {res.slope * 1e9:.2f} ns/edge, intercept {1000 * res.intercept:.1f} ms, R^2 {res.r2:.3f}")
