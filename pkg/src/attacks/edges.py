"""Greedy gradient-guided edge flipping shared by the fraudster attack and FGA."""
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Literal, Sequence

import torch
from torch import nn

from src.errors import AttackError
from src.models import grad_wrt_adjacency
from src.numerics import DenseMatrix, SparseSymMatrix

FlipScoring = Literal["literal", "direction"]


@dataclass
class EdgeSelection:
    adjacency: SparseSymMatrix
    flips: list[tuple[int, int]] = field(default_factory=list)
    # Objective before the first flip and after each flip.
    losses: list[float] = field(default_factory=list)


def target_candidates(n: int, target: int) -> list[tuple[int, int]]:
    return [(min(target, u), max(target, u)) for u in range(n) if u != target]


def all_candidates(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


def candidate_pairs(n: int, target: int, mode: Literal["target", "all"]) -> list[tuple[int, int]]:
    return target_candidates(n, target) if mode == "target" else all_candidates(n)


def present_values(adjacency: SparseSymMatrix, pairs: Sequence[tuple[int, int]]) -> torch.Tensor:
    keys = torch.tensor([min(u, v) * adjacency.n + max(u, v) for u, v in pairs], dtype=torch.long)
    at = torch.searchsorted(adjacency.keys, keys).clamp(max=max(adjacency.nnz - 1, 0))
    if adjacency.nnz == 0:
        return torch.zeros(len(pairs), dtype=torch.float64)
    hit = adjacency.keys[at] == keys
    return torch.where(hit, adjacency.values.detach()[at], torch.zeros((), dtype=torch.float64))


def greedy_flips(
    model: nn.Module,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    loss_fn: Callable[[DenseMatrix], torch.Tensor],
    candidates: Sequence[tuple[int, int]],
    budget: int,
    maximize: bool,
    scoring: FlipScoring = "literal",
) -> EdgeSelection:
    """Toggle ``budget`` candidate pairs one at a time, each chosen by the
    symmetrized adjacency gradient of ``loss_fn`` at the current adjacency.

    ``direction`` scoring ranks a toggle by the first-order loss change it
    causes, g_sym * (1 - 2 A_uv); ``literal`` ranks by g_sym alone. Ties go to
    the lexicographically smallest pair, and a toggled pair is never revisited.
    """
    if not candidates:
        raise AttackError("candidate set is empty")
    if budget < 1:
        raise AttackError(f"budget must be at least 1, got {budget}")
    if budget > len(candidates):
        raise AttackError(f"budget {budget} exceeds the {len(candidates)} candidate pairs")
    pairs = sorted({(min(u, v), max(u, v)) for u, v in candidates})
    current = adjacency.detached()
    taken = torch.zeros(len(pairs), dtype=torch.bool)
    selection = EdgeSelection(current)
    sign = 1.0 if maximize else -1.0

    def objective(a: SparseSymMatrix) -> float:
        with torch.no_grad():
            return float(loss_fn(model(a, features)))

    selection.losses.append(objective(current))
    for _ in range(budget):
        g_sym = grad_wrt_adjacency(model, current, features, loss_fn, pairs)
        score = sign * g_sym
        if scoring == "direction":
            score = score * (1.0 - 2.0 * present_values(current, pairs))
        score = score.masked_fill(taken, float("-inf"))
        best = int(torch.argmax(score))
        taken[best] = True
        u, v = pairs[best]
        current = current.toggled(u, v)
        selection.flips.append((u, v))
        selection.losses.append(objective(current))
    selection.adjacency = current
    return selection
