"""Missing node-feature estimation with a structured variational graph autoencoder."""
from .data import Dataset, FeatureTable, SplitMasks, load_dataset, make_splits, sample_label_mask
from .graph import Graph, build_graph, gmrf_information_matrix, normalized_adjacency
from .trainer import TrainConfig, Trainer, grid_search, run_ablation, train

__version__ = "0.1.0"
