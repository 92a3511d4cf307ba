import pytest
import torch

from src.federation import TrainingConfig, build_system, train
from src.graph import make_split, partition, synth_sbm
from src.numerics import SeededRng, SparseSymMatrix


@pytest.fixture
def rng() -> SeededRng:
    return SeededRng(7)


@pytest.fixture(scope="session")
def sbm_graph():
    return synth_sbm([15, 15], 0.5, 0.02, 6, SeededRng(3, (1,)), noise=0.1)


def build_small_system(graph, seed: int = 11, mode: str = "dual", epochs: int = 60, **kwargs):
    rng = SeededRng(seed)
    shards = partition(graph, 2, mode, rng.derive("partition"))
    split = make_split(graph, rng.derive("split"), per_class_train=4, val_size=4, test_size=12)
    training = TrainingConfig(epochs=epochs, lr=0.05, server_hidden=[8], log_every=0)
    return build_system(graph, shards, split, rng.derive("system"), "gcn", 8, 4, training, **kwargs)


@pytest.fixture(scope="session")
def trained_system(sbm_graph):
    """Shared across tests; attacks and metrics never mutate it."""
    return train(build_small_system(sbm_graph))


@pytest.fixture
def path_graph_adjacency() -> SparseSymMatrix:
    # 0-1-2-3-4 plus the chord 1-3
    return SparseSymMatrix.from_pairs(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)])


@pytest.fixture
def small_features() -> torch.Tensor:
    return torch.arange(15, dtype=torch.float64).reshape(5, 3) / 10.0
