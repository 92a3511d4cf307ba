"""Scoring perturbed malicious shards against the real server."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import torch

from src.errors import AttackError
from src.evaluation import MarginRecord, TargetOutcome, TargetSelection
from src.federation import GvflSystem, concat_embeddings
from src.numerics import DenseMatrix, SparseSymMatrix

logger = logging.getLogger(__name__)


def labelled_targets(selection: TargetSelection) -> list[tuple[int, str]]:
    return ([(v, "highest") for v in selection.highest] + [(v, "lowest") for v in selection.lowest]
            + [(v, "random") for v in selection.random])


class PerturbationEvaluator:
    """Re-embeds the malicious shard on a perturbed adjacency and re-queries the
    server for one target, with every other upload held at its clean value."""

    def __init__(self, system: GvflSystem, malicious: int):
        if not 0 <= malicious < system.k:
            raise AttackError(f"malicious participant {malicious} out of range for K={system.k}")
        if system.probabilities is None:
            raise AttackError("the system must be trained before it is attacked")
        self.system = system
        self.malicious = malicious
        self.participant = system.participants[malicious]
        self.clean_adjacency = self.participant.adjacency
        self.uploads = system.uploads()
        with torch.no_grad():
            self.raw_embeddings = self.participant.embed()

    def adversarial_row(self, target: int, adjacency: SparseSymMatrix) -> DenseMatrix:
        h_local = self.participant.embed(adjacency)
        parts = list(self.uploads)
        parts[self.malicious] = self.system.upload(self.malicious, h_local)
        return concat_embeddings([p[target:target + 1] for p in parts])

    def outcome(
        self,
        target: int,
        group: str,
        adjacency: SparseSymMatrix,
        flips: Sequence[tuple[int, int]],
        budget: int,
        guidance_loss: Sequence[float] = (),
    ) -> TargetOutcome:
        changed = adjacency.differs_from(self.clean_adjacency)
        if changed != 2 * budget:
            raise AttackError(f"perturbation of target {target} changes {changed} entries, expected {2 * budget}")
        true_class = int(self.system.labels[target])
        before = MarginRecord.from_row(target, true_class, self.system.probabilities[target])
        with torch.no_grad():
            after_row = self.system.server.probabilities(self.adversarial_row(target, adjacency))[0]
        after = MarginRecord.from_row(target, true_class, after_row)
        return TargetOutcome(
            node=target,
            group=group,
            true_class=true_class,
            flips=[(int(u), int(v)) for u, v in flips],
            clean_prediction=int(torch.argmax(self.system.probabilities[target])),
            adversarial_prediction=int(torch.argmax(after_row)),
            margin_before=before.margin,
            margin_after=after.margin,
            success=after.margin <= 0,
            guidance_loss=list(guidance_loss),
        )

    def unperturbed(self, target: int, group: str, reason: str) -> TargetOutcome:
        """Outcome for a target the attack could not perturb: clean margins, no flips."""
        true_class = int(self.system.labels[target])
        clean = MarginRecord.from_row(target, true_class, self.system.probabilities[target])
        prediction = int(torch.argmax(self.system.probabilities[target]))
        return TargetOutcome(
            node=target,
            group=group,
            true_class=true_class,
            flips=[],
            clean_prediction=prediction,
            adversarial_prediction=prediction,
            margin_before=clean.margin,
            margin_after=clean.margin,
            success=False,
            skipped=reason,
        )


def run_targets(
    targets: Sequence[tuple[int, str]],
    attack_one: Callable[[int, str], TargetOutcome],
    jobs: int = 1,
) -> list[TargetOutcome]:
    """Attack each target independently; results keep the input order."""
    if jobs <= 1:
        return [attack_one(v, group) for v, group in targets]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda item: attack_one(*item), targets))


def attacked_accuracy(outcomes: Sequence[TargetOutcome]) -> float:
    if not outcomes:
        raise AttackError("no attacked targets")
    return sum(1 for o in outcomes if o.margin_after > 0) / len(outcomes)
