from typing import Sequence

import numpy as np
import torch

from src.numerics import DTYPE, SeededRng, SparseSymMatrix

from .store import Graph


def synth_sbm(
    blocks: Sequence[int],
    intra_p: float,
    inter_p: float,
    feat_dim: int,
    rng: SeededRng,
    noise: float = 0.1,
) -> Graph:
    """Stochastic block model; features are the block indicator plus Gaussian noise."""
    if not (0.0 <= intra_p <= 1.0 and 0.0 <= inter_p <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if feat_dim < len(blocks):
        raise ValueError(f"feat_dim={feat_dim} cannot hold {len(blocks)} block indicators")
    labels = np.repeat(np.arange(len(blocks)), blocks)
    n = labels.size
    generator = rng.numpy()

    draws = generator.random((n, n))
    same = labels[:, None] == labels[None, :]
    hit = np.where(same, draws < intra_p, draws < inter_p)
    u, v = np.nonzero(np.triu(hit, k=1))
    pairs = np.stack([u, v], axis=1)
    adjacency = SparseSymMatrix.from_pairs(n, pairs) if pairs.size else SparseSymMatrix.empty(n)

    features = np.zeros((n, feat_dim))
    features[np.arange(n), labels] = 1.0
    features += noise * generator.standard_normal((n, feat_dim))

    return Graph(
        n=n,
        adjacency=adjacency,
        features=torch.tensor(features, dtype=DTYPE),
        labels=torch.tensor(labels, dtype=torch.long),
        num_classes=len(blocks),
        label_names=tuple(str(b) for b in range(len(blocks))),
        name="sbm",
        raw_edge_count=int(pairs.shape[0]),
    )
