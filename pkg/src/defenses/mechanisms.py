"""Upload-time mitigations: Laplace noise (DP) and Top-k sparsification."""
from typing import Literal

import torch
from pydantic import BaseModel, ConfigDict, Field

from src.errors import DefenseError
from src.numerics import DTYPE, DenseMatrix, SeededRng

DefenseKind = Literal["none", "dp", "topk"]


class DefenseConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DefenseKind = "none"
    beta: float = Field(0.0, ge=0.0, le=0.5)
    k: int = Field(16, ge=1)
    # Rank Top-k by |value| instead of signed value.
    absolute: bool = False
    # DP noise on training uploads too, not only at inference.
    apply_in_training: bool = True


def dp_perturb(h_local: DenseMatrix, beta: float, rng: SeededRng) -> DenseMatrix:
    """Add i.i.d. Laplace(0, beta) noise elementwise."""
    if beta < 0:
        raise DefenseError(f"Laplace scale must be non-negative, got {beta}")
    if beta == 0:
        return h_local.clone()
    noise = rng.numpy().laplace(0.0, beta, size=tuple(h_local.shape))
    return h_local + torch.as_tensor(noise, dtype=DTYPE)


def topk_mask(h_local: DenseMatrix, k: int, absolute: bool = False) -> torch.Tensor:
    d = h_local.shape[1]
    if not 1 <= k <= d:
        raise DefenseError(f"k must lie in [1, {d}], got {k}")
    scores = h_local.abs() if absolute else h_local
    # Stable descending sort keeps the lowest index first among ties.
    order = torch.sort(scores.detach(), dim=1, descending=True, stable=True).indices
    mask = torch.zeros_like(h_local, dtype=torch.bool)
    return mask.scatter(1, order[:, :k], True)


def topk_filter(h_local: DenseMatrix, k: int, absolute: bool = False) -> DenseMatrix:
    """Keep the k largest values per row, zero the rest."""
    return torch.where(topk_mask(h_local, k, absolute), h_local, torch.zeros_like(h_local))


class UploadDefense:
    """Applies a DefenseConfig to one participant's embedding upload."""

    def __init__(self, config: DefenseConfig, embedding_dim: int):
        if config.kind == "topk" and config.k > embedding_dim:
            raise DefenseError(f"top-k k={config.k} exceeds embedding dimension {embedding_dim}")
        self.config = config

    def apply(self, h_local: DenseMatrix, rng: SeededRng, training: bool = False) -> DenseMatrix:
        cfg = self.config
        if cfg.kind == "dp" and (cfg.apply_in_training or not training):
            return dp_perturb(h_local, cfg.beta, rng)
        if cfg.kind == "topk":
            return topk_filter(h_local, cfg.k, cfg.absolute)
        return h_local

    def grad_mask(self, h_local: DenseMatrix) -> DenseMatrix:
        """Jacobian of ``apply`` as an elementwise mask (noise has unit Jacobian)."""
        if self.config.kind == "topk":
            return topk_mask(h_local, self.config.k, self.config.absolute).to(DTYPE)
        return torch.ones_like(h_local)
