"""Transfer baselines (RND, FGA) through a surrogate trained on the malicious shard."""
import logging
from dataclasses import dataclass, field
from typing import Literal, Sequence

import torch
from torch import nn

from src.errors import AttackError
from src.evaluation import AttackReport, TargetSelection
from src.federation import GvflSystem, ProbabilityApi, predict
from src.models import LocalModel, ModelKind
from src.numerics import (
    AdamState,
    DenseMatrix,
    SeededRng,
    SparseSymMatrix,
    Tape,
    adam_step,
    backward,
    cross_entropy_logits,
    glorot_uniform,
    matmul,
)

from .config import AttackConfig
from .edges import EdgeSelection, candidate_pairs, greedy_flips
from .evaluation import PerturbationEvaluator, attacked_accuracy, labelled_targets, run_targets

logger = logging.getLogger(__name__)

# Distillation keeps going up to this multiple of the requested epochs until the train nodes are fitted.
SURROGATE_EPOCH_LIMIT = 4


class Surrogate(nn.Module):
    """A local GNN with a private linear head (d -> |F|)."""

    def __init__(self, kind: ModelKind, in_features: int, num_classes: int, rng: SeededRng,
                 hidden: int = 32, embedding_dim: int = 16):
        super().__init__()
        self.gnn = LocalModel(kind, in_features, rng.derive("gnn"), hidden, embedding_dim)
        self.head = nn.Parameter(glorot_uniform(embedding_dim, num_classes, rng.derive("head").torch()))

    def forward(self, adjacency: SparseSymMatrix, features: DenseMatrix) -> DenseMatrix:
        return matmul(self.gnn(adjacency, features), self.head)

    def predict(self, adjacency: SparseSymMatrix, features: DenseMatrix) -> torch.Tensor:
        with torch.no_grad():
            return self(adjacency, features).argmax(dim=1)


@dataclass
class SurrogateResult:
    surrogate: Surrogate
    agreement: float
    losses: list[float] = field(default_factory=list)


def fit_classifier(
    model: nn.Module,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    labels: torch.Tensor,
    train_nodes: Sequence[int],
    epochs: int,
    lr: float,
    max_epochs: int | None = None,
) -> list[float]:
    """Full-batch cross-entropy training of a graph classifier; returns the loss trajectory.

    With ``max_epochs`` training runs past ``epochs`` until every train node is
    predicted as labelled, or ``max_epochs`` is reached.
    """
    params = list(model.parameters())
    adam = AdamState(lr=lr)
    mask = torch.tensor(list(train_nodes), dtype=torch.long)
    losses = []
    for epoch in range(max(epochs, max_epochs or 0)):
        with Tape():
            logits = model(adjacency, features)
            if epoch >= epochs and bool((logits[mask].argmax(dim=1) == labels[mask]).all()):
                break
            loss = cross_entropy_logits(logits, labels, mask)
        losses.append(float(loss))
        adam_step(adam, params, backward(loss, params))
    return losses


def train_surrogate(
    api: ProbabilityApi,
    system: GvflSystem,
    malicious: int,
    rng: SeededRng,
    epochs: int = 200,
    lr: float = 0.01,
) -> SurrogateResult:
    """Distil the server's hard predictions on train nodes into a surrogate that sees
    only the malicious participant's shard."""
    participant = system.participants[malicious]
    # Predictions the federation returns for its regular inference round.
    hard = predict(api, system.global_embeddings()).argmax(dim=1)
    surrogate = Surrogate(participant.model.kind, participant.features.shape[1], system.graph.num_classes, rng,
                          participant.model.hidden, participant.model.embedding_dim)
    losses = fit_classifier(surrogate, participant.adjacency, participant.features, hard, system.split.train,
                            epochs, lr, max_epochs=SURROGATE_EPOCH_LIMIT * epochs)
    agreement = float((surrogate.predict(participant.adjacency, participant.features) == hard).double().mean())
    logger.info(f"Surrogate trained: loss {losses[0]:.4f} -> {losses[-1]:.4f}, agreement {agreement:.3f}")
    return SurrogateResult(surrogate, agreement, losses)


def rnd_attack(
    surrogate: Surrogate,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    target: int,
    budget: int,
    rng: SeededRng,
) -> EdgeSelection:
    """Connect the target to ``budget`` random nodes whose predicted label differs from its own."""
    predicted = surrogate.predict(adjacency, features)
    differing = [u for u in range(adjacency.n) if u != target and predicted[u] != predicted[target]]
    if not differing:
        raise AttackError(f"no node has a predicted label different from target {target}")
    neighbours = set(adjacency.neighbors(target))
    pool = [u for u in differing if u not in neighbours]
    if len(pool) < budget:
        raise AttackError(f"only {len(pool)} unconnected differing-label nodes for budget {budget}")
    chosen = rng.numpy().choice(len(pool), size=budget, replace=False)
    selection = EdgeSelection(adjacency.detached())
    for i in sorted(chosen.tolist()):
        u, v = sorted((target, pool[i]))
        selection.adjacency = selection.adjacency.toggled(u, v)
        selection.flips.append((u, v))
    return selection


def fga_attack(
    surrogate: Surrogate,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    target: int,
    budget: int,
    candidates: Sequence[tuple[int, int]] | None = None,
) -> EdgeSelection:
    """Greedy flips with the largest loss-increasing |dL_atk/dA| on the surrogate."""
    label = int(surrogate.predict(adjacency, features)[target])
    labels = torch.full((adjacency.n,), label, dtype=torch.long)
    mask = torch.tensor([target])

    def attack_loss(logits: DenseMatrix) -> torch.Tensor:
        return cross_entropy_logits(logits, labels, mask)

    if candidates is None:
        candidates = candidate_pairs(adjacency.n, target, "target")
    return greedy_flips(surrogate, adjacency, features, attack_loss, candidates, budget, maximize=True,
                        scoring="direction")


def run_baseline(
    system: GvflSystem,
    method: Literal["rnd", "fga"],
    malicious: int,
    targets: TargetSelection | Sequence[int],
    budget: int,
    rng: SeededRng,
    config: AttackConfig | None = None,
    test_nodes: Sequence[int] | None = None,
    jobs: int = 1,
) -> AttackReport:
    config = config or AttackConfig(method=method)
    evaluator = PerturbationEvaluator(system, malicious)
    participant = evaluator.participant
    api = system.api()
    fitted = train_surrogate(api, system, malicious, rng.derive("surrogate"), config.surrogate_epochs, config.lr)

    def attack_one(target: int, group: str):
        if method == "rnd":
            try:
                selection = rnd_attack(fitted.surrogate, participant.adjacency, participant.features, target,
                                       budget, rng.derive("rnd", target))
            except AttackError as e:
                logger.warning(f"RND left target {target} unperturbed: {e}")
                return evaluator.unperturbed(target, group, str(e))
        elif method == "fga":
            selection = fga_attack(fitted.surrogate, participant.adjacency, participant.features, target, budget,
                                   candidate_pairs(system.graph.n, target, config.candidates))
        else:
            raise AttackError(f"unknown baseline {method!r}")
        return evaluator.outcome(target, group, selection.adjacency, selection.flips, budget, selection.losses)

    if isinstance(targets, TargetSelection):
        labelled = labelled_targets(targets)
    else:
        labelled = [(int(v), "given") for v in targets]
    outcomes = run_targets(labelled, attack_one, jobs)
    report = AttackReport(
        method=method,
        epsilon=0.0,
        budget=budget,
        malicious=malicious,
        targets=outcomes,
        accuracy_targets=attacked_accuracy(outcomes),
        surrogate_agreement=fitted.agreement,
    )
    if test_nodes:
        report.accuracy_test = attacked_accuracy(run_targets([(int(v), "test") for v in test_nodes], attack_one, jobs))
    report.queries = api.queries
    logger.info(f"{method.upper()}: target accuracy {report.accuracy_targets:.3f}")
    return report
