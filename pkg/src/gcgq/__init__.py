"""Attributed-graph clustering with quaternion graph autoencoders."""

from .clustering import NumericalError, kmeans, spectral_cluster
from .config import ExperimentConfig, load_config
from .graph import AttributedGraph, DataError, generate_planted_partition, load_graph, save_graph
from .metrics import MetricBundle, evaluate
from .model import ArchitectureSpec, GcgqModel, forward, init_model, load_checkpoint, save_checkpoint
from .training import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "ArchitectureSpec", "AttributedGraph", "DataError", "ExperimentConfig", "GcgqModel",
    "MetricBundle", "NumericalError", "TrainConfig", "evaluate", "forward",
    "generate_planted_partition", "init_model", "kmeans", "load_checkpoint", "load_config",
    "load_graph", "save_checkpoint", "save_graph", "spectral_cluster", "train",
]
