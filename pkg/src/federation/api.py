"""The server's query surface: probabilities in, nothing else out."""
import copy

import torch

from src.errors import ShapeError
from src.models import ServerModel
from src.numerics import DenseMatrix


class ProbabilityApi:
    """Returns P = S(h_global) for arbitrary embeddings; parameters stay hidden.

    The wrapped server is a frozen private copy reachable only through a closure.
    Returned probabilities are always detached from the caller's graph.
    """

    __slots__ = ("_forward", "_queries", "in_width", "num_classes")

    def __init__(self, server: ServerModel):
        frozen = copy.deepcopy(server).requires_grad_(False)

        def forward(h_global: DenseMatrix) -> DenseMatrix:
            return frozen.probabilities(h_global)

        self._forward = forward
        self._queries = 0
        self.in_width = server.in_width
        self.num_classes = server.num_classes

    @property
    def queries(self) -> int:
        """Number of embedding rows submitted so far."""
        return self._queries

    def _check(self, h_global: DenseMatrix) -> None:
        if h_global.dim() != 2 or h_global.shape[1] != self.in_width:
            raise ShapeError(f"API expects {self.in_width} embedding columns, got {tuple(h_global.shape)}")
        self._queries += int(h_global.shape[0])

    def query(self, h_global: DenseMatrix) -> DenseMatrix:
        self._check(h_global)
        with torch.no_grad():
            return self._forward(h_global.detach())


class ServerOracle(ProbabilityApi):
    """White-box server handle for autograd stealing.

    Weights stay frozen and hidden, but ``probabilities`` keeps the output
    attached to the caller's graph, so dP/dh_global reaches the caller. Only
    the attack's ``stealing = "autograd"`` mode asks for one.
    """

    __slots__ = ()

    def probabilities(self, h_global: DenseMatrix) -> DenseMatrix:
        self._check(h_global)
        return self._forward(h_global)


def predict(api: ProbabilityApi, h_global: DenseMatrix) -> DenseMatrix:
    return api.query(h_global)
