from dataclasses import dataclass, field
from typing import Sequence

import torch

from src.errors import ShapeError


@dataclass
class AdamState:
    """Adam hyperparameters plus the moment buffers of one parameter group.

    The moments live inside a ``torch.optim.Adam`` bound to the first
    parameter list passed to ``adam_step``.
    """

    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _optimizer: torch.optim.Adam | None = field(default=None, init=False, repr=False)
    _params: tuple[torch.Tensor, ...] = field(default=(), init=False, repr=False)

    @property
    def step(self) -> int:
        if self._optimizer is None or not self._params:
            return 0
        state = self._optimizer.state.get(self._params[0], {})
        return int(state["step"]) if "step" in state else 0

    def moments(self, param: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor] | None:
        if self._optimizer is None or param not in self._optimizer.state:
            return None
        state = self._optimizer.state[param]
        return state["exp_avg"], state["exp_avg_sq"]

    def bind(self, params: Sequence[torch.Tensor]) -> torch.optim.Adam:
        params = tuple(params)
        if self._optimizer is None:
            self._optimizer = torch.optim.Adam(
                params, lr=self.lr, betas=(self.beta1, self.beta2), eps=self.eps, foreach=False
            )
            self._params = params
        elif len(params) != len(self._params) or any(a is not b for a, b in zip(params, self._params)):
            raise ShapeError("AdamState is bound to a different parameter list")
        return self._optimizer


def adam_step(state: AdamState, params: Sequence[torch.Tensor], grads: Sequence[torch.Tensor]) -> list[torch.Tensor]:
    """Bias-corrected Adam update applied in place; returns the parameters."""
    params, grads = list(params), list(grads)
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {tuple(g.shape)} does not match parameter {tuple(p.shape)}")
    optimizer = state.bind(params)
    for p, g in zip(params, grads):
        p.grad = g.detach().clone()
    optimizer.step()
    for p in params:
        p.grad = None
    return params
