"""Classification margin and the target-node selection protocol."""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
import torch

from src.errors import ShapeError
from src.numerics import SeededRng

if TYPE_CHECKING:
    from src.federation import GvflSystem

logger = logging.getLogger(__name__)


def classification_margin(p_row: Sequence[float] | torch.Tensor, true_class: int) -> float:
    """p_true - max_{c != true} p_c."""
    p = torch.as_tensor(p_row, dtype=torch.float64).flatten()
    if not 0 <= true_class < p.shape[0]:
        raise ShapeError(f"class {true_class} out of range for {p.shape[0]} classes")
    others = torch.cat([p[:true_class], p[true_class + 1:]])
    if others.numel() == 0:
        return float(p[true_class])
    return float(p[true_class] - others.max())


def margins(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Row-wise classification margin."""
    true = probs.gather(1, labels.unsqueeze(1)).squeeze(1)
    others = probs.scatter(1, labels.unsqueeze(1), float("-inf"))
    return true - others.max(dim=1).values


def correct_mask(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Correct means a strictly positive margin; exact ties count as wrong."""
    return margins(probs, labels) > 0


@dataclass(frozen=True)
class MarginRecord:
    node: int
    true_class: int
    probabilities: tuple[float, ...]
    margin: float

    @classmethod
    def from_row(cls, node: int, true_class: int, p_row: torch.Tensor) -> "MarginRecord":
        return cls(node, true_class, tuple(float(x) for x in p_row), classification_margin(p_row, true_class))


@dataclass(frozen=True)
class TargetSelection:
    highest: tuple[int, ...]
    lowest: tuple[int, ...]
    random: tuple[int, ...]

    @property
    def nodes(self) -> list[int]:
        return [*self.highest, *self.lowest, *self.random]


def select_targets(
    system: "GvflSystem",
    test_nodes: Sequence[int],
    rng: SeededRng,
    highest: int = 20,
    lowest: int = 20,
    random: int = 60,
) -> TargetSelection:
    """20 highest-margin, 20 lowest-margin-but-correct and 60 random correct test nodes.

    With fewer correct nodes than requested the three groups shrink proportionally.
    Margin ties are resolved by node id.
    """
    nodes = torch.tensor(sorted(test_nodes), dtype=torch.long)
    m = margins(system.probabilities[nodes], system.labels[nodes])
    correct = [(float(mv), int(v)) for mv, v in zip(m, nodes) if mv > 0]
    wanted = highest + lowest + random
    if len(correct) < wanted:
        scale = len(correct) / wanted
        highest, lowest = int(highest * scale), int(lowest * scale)
        random = len(correct) - highest - lowest
        logger.warning(f"Only {len(correct)} correctly classified test nodes; "
                       f"selecting {highest}/{lowest}/{random}")

    by_high = sorted(correct, key=lambda mv: (-mv[0], mv[1]))
    top = [v for _, v in by_high[:highest]]
    taken = set(top)
    by_low = sorted((mv for mv in correct if mv[1] not in taken), key=lambda mv: (mv[0], mv[1]))
    bottom = [v for _, v in by_low[:lowest]]
    taken.update(bottom)
    pool = np.asarray(sorted(v for _, v in correct if v not in taken), dtype=np.int64)
    picked = rng.numpy().choice(pool, size=random, replace=False) if random else np.zeros(0, dtype=np.int64)
    return TargetSelection(tuple(top), tuple(bottom), tuple(sorted(picked.tolist())))
