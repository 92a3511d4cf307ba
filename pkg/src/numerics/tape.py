"""Reverse-mode gradients on top of torch autograd."""
from typing import Sequence

import torch

from src.errors import ShapeError


class Tape:
    """Records differentiable ops executed inside the ``with`` block.

    Leaves created through ``watch`` are fresh tensors that require grad;
    anything not watched (and not an ``nn.Parameter``) is a constant.
    """

    def __init__(self):
        self._grad_mode = torch.enable_grad()

    def __enter__(self) -> "Tape":
        self._grad_mode.__enter__()
        return self

    def __exit__(self, *exc) -> None:
        self._grad_mode.__exit__(*exc)

    def watch(self, tensor: torch.Tensor) -> torch.Tensor:
        return tensor.detach().clone().requires_grad_(True)


def backward(
    loss: torch.Tensor,
    leaves: Sequence[torch.Tensor],
    seed: torch.Tensor | None = None,
    retain_graph: bool = False,
) -> list[torch.Tensor]:
    """Gradients of ``loss`` for each leaf; leaves the loss does not touch get zeros.

    Without ``seed`` the loss must be a scalar. With ``seed`` this is a
    vector-Jacobian product (the seed has the loss's shape).
    """
    if seed is None and loss.numel() != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {tuple(loss.shape)}")
    if seed is not None and seed.shape != loss.shape:
        raise ShapeError(f"seed shape {tuple(seed.shape)} does not match {tuple(loss.shape)}")
    leaves = list(leaves)
    if not loss.requires_grad:
        return [torch.zeros_like(leaf) for leaf in leaves]
    grads = torch.autograd.grad(
        loss, leaves, grad_outputs=seed, allow_unused=True, retain_graph=retain_graph
    )
    return [torch.zeros_like(leaf) if g is None else g for leaf, g in zip(leaves, grads)]
