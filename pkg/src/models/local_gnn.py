"""Participant-side 2-layer GCN / SGC producing d-dimensional node embeddings."""
from typing import Callable, Literal, Sequence

import torch
from torch import nn

from src.errors import ShapeError
from src.graph import normalize
from src.numerics import AdamState, DenseMatrix, SeededRng, SparseSymMatrix, Tape, adam_step, backward, glorot_uniform, matmul, spmm

ModelKind = Literal["gcn", "sgc"]


class LocalModel(nn.Module):
    """GCN: Ã·ReLU(Ã·X·W0)·W1.  SGC: Ã·Ã·X·W0·W1.

    Ã is recomputed from the raw adjacency on every forward pass, so gradients
    with respect to adjacency values include the degree terms. No biases.
    """

    def __init__(self, kind: ModelKind, in_features: int, rng: SeededRng, hidden: int = 32, embedding_dim: int = 16):
        super().__init__()
        if kind not in ("gcn", "sgc"):
            raise ValueError(f"unknown local model kind {kind!r}")
        self.kind = kind
        self.in_features = in_features
        self.hidden = hidden
        self.embedding_dim = embedding_dim
        generator = rng.torch()
        self.W0 = nn.Parameter(glorot_uniform(in_features, hidden, generator))
        self.W1 = nn.Parameter(glorot_uniform(hidden, embedding_dim, generator))

    def forward(self, adjacency: SparseSymMatrix, features: DenseMatrix) -> DenseMatrix:
        if features.dim() != 2 or features.shape[1] != self.in_features:
            raise ShapeError(f"expected {self.in_features} feature columns, got {tuple(features.shape)}")
        a_norm = normalize(adjacency)
        hidden = spmm(a_norm, matmul(features, self.W0))
        if self.kind == "gcn":
            hidden = torch.relu(hidden)
            return spmm(a_norm, matmul(hidden, self.W1))
        return matmul(spmm(a_norm, hidden), self.W1)

    def embed(self, adjacency: SparseSymMatrix, features: DenseMatrix) -> DenseMatrix:
        """Forward pass outside any tape."""
        with torch.no_grad():
            return self(adjacency, features)


def forward(model: LocalModel, adjacency: SparseSymMatrix, features: DenseMatrix) -> DenseMatrix:
    return model(adjacency, features)


def check_pairs(n: int, pairs: Sequence[tuple[int, int]]) -> None:
    for u, v in pairs:
        if u == v:
            raise ShapeError(f"candidate pair ({u}, {v}) is a self-loop")
        if not (0 <= u < n and 0 <= v < n):
            raise ShapeError(f"candidate pair ({u}, {v}) out of range for n={n}")


def grad_wrt_adjacency(
    model: nn.Module,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    loss_fn: Callable[[DenseMatrix], torch.Tensor],
    candidates: Sequence[tuple[int, int]],
) -> torch.Tensor:
    """Symmetrized gradient g_sym[u, v] = (g_uv + g_vu) / 2 for every candidate pair.

    The symmetric pair is a single stored variable s = A_uv = A_vu, so
    dL/ds = g_uv + g_vu and g_sym is half of it.
    """
    if not candidates:
        raise ShapeError("candidate pair set is empty")
    check_pairs(adjacency.n, candidates)
    merged, positions = adjacency.detached().with_pairs(candidates)
    with Tape() as tape:
        values = tape.watch(merged.values)
        loss = loss_fn(model(merged.with_values(values), features))
    (grad,) = backward(loss, [values])
    return grad[positions] / 2.0


def local_step(
    model: LocalModel,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    upstream_grad: DenseMatrix,
    adam: AdamState,
) -> LocalModel:
    """Back-propagate the server's gradient slice into W0/W1 and take an Adam step."""
    expected = (features.shape[0], model.embedding_dim)
    if tuple(upstream_grad.shape) != expected:
        raise ShapeError(f"upstream gradient shape {tuple(upstream_grad.shape)} != {expected}")
    params = [model.W0, model.W1]
    with Tape():
        embeddings = model(adjacency, features)
    grads = backward(embeddings, params, seed=upstream_grad)
    adam_step(adam, params, grads)
    return model
