from typing import Sequence

import torch
from torch import nn

from src.errors import ShapeError
from src.numerics import DenseMatrix, SeededRng, glorot_uniform, matmul, row_softmax


class ServerModel(nn.Module):
    """MLP classifier over concatenated embeddings: softmax(W_l·ρ(…ρ(W_0·h))).

    Also used as the attacker's shadow server, which shares the architecture.
    """

    def __init__(self, in_width: int, num_classes: int, rng: SeededRng, hidden: Sequence[int] = (32,)):
        super().__init__()
        self.in_width = in_width
        self.num_classes = num_classes
        self.hidden = tuple(hidden)
        widths = [in_width, *self.hidden, num_classes]
        generator = rng.torch()
        self.weights = nn.ParameterList(
            nn.Parameter(glorot_uniform(a, b, generator)) for a, b in zip(widths[:-1], widths[1:])
        )

    def forward(self, h_global: DenseMatrix) -> DenseMatrix:
        """Logits; apply ``row_softmax`` for probabilities."""
        if h_global.dim() != 2 or h_global.shape[1] != self.in_width:
            raise ShapeError(f"server expects {self.in_width} input columns, got {tuple(h_global.shape)}")
        out = h_global
        for i, w in enumerate(self.weights):
            out = matmul(out, w)
            if i < len(self.weights) - 1:
                out = torch.relu(out)
        return out

    def probabilities(self, h_global: DenseMatrix) -> DenseMatrix:
        return row_softmax(self(h_global))
