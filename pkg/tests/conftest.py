import numpy as np
import pytest

from gcgq.graph import AttributedGraph, adjacency_from_edges, generate_planted_partition
from gcgq.model import ArchitectureSpec


@pytest.fixture
def tiny_arch():
    return ArchitectureSpec(fvp_dim=4, qge_dims=(3, 2))


@pytest.fixture
def planted():
    return generate_planted_partition(3, 20, 0.4, 0.02, attr_dim=6, rng_seed=7)


@pytest.fixture
def random_graph():
    """n = 8 graph with d = 5 attributes and two label classes."""
    rng = np.random.default_rng(3)
    edges = [(i, (i + 1) % 8) for i in range(8)] + [(0, 4), (2, 6), (1, 5)]
    adj = adjacency_from_edges(8, np.array(edges))
    return AttributedGraph(adj, rng.normal(size=(8, 5)), np.array([0, 0, 0, 0, 1, 1, 1, 1]))
