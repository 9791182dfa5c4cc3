"""
Using observed labels
=====================

Class labels are often easier to come by than features. Labels observed on
any node, including nodes whose features are missing, feed a second decoder
and shape the shared embeddings.
"""

import numpy as np

from svga import make_splits, sample_label_mask, TrainConfig
from svga.synthetic import citation_like
from svga.trainer import Trainer

ds = citation_like(n=600, m=300, c=5, homophily=0.6, seed=2)
config = TrainConfig(d=64, lr=0.01, max_epochs=200, patience=50)

for ratio in (0.0, 0.5, 1.0):
    scores = []
    for seed in range(3):
        masks = make_splits(ds.graph.n, seed=seed).with_labels(sample_label_mask(ds.graph.n, ratio, seed=seed))
        trainer = Trainer(ds, masks, config.replace(seed=seed))
        params, _ = trainer.fit()
        scores.append(trainer.score(params, masks.feat_test, "recall@10"))
    print(f"label ratio {ratio:.1f}: test recall@10 {np.mean(scores):.3f} +- {np.std(scores):.3f}")
