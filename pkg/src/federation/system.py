"""GNN-based vertical federated learning: K participants, one server, split backprop."""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import torch
from pydantic import BaseModel, ConfigDict, Field

from src.defenses import DefenseConfig, UploadDefense
from src.errors import GvflError, ShapeError, TrainingDivergedError
from src.evaluation.metrics import correct_mask
from src.graph import Graph, SplitSpec, VerticalPartition
from src.models import LocalModel, ModelKind, ServerModel, local_step
from src.numerics import AdamState, DenseMatrix, SeededRng, SparseSymMatrix, Tape, adam_step, backward, concat_columns, cross_entropy_logits

from .api import ProbabilityApi, ServerOracle

logger = logging.getLogger(__name__)


class TrainingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(200, ge=1)
    lr: float = Field(0.01, gt=0.0)
    server_hidden: list[int] = Field(default_factory=lambda: [32])
    log_every: int = 20


@dataclass
class Participant:
    index: int
    model: LocalModel
    features: DenseMatrix
    adjacency: SparseSymMatrix
    adam: AdamState

    def embed(self, adjacency: SparseSymMatrix | None = None) -> DenseMatrix:
        return self.model.embed(self.adjacency if adjacency is None else adjacency, self.features)


@dataclass
class GvflSystem:
    graph: Graph
    partition: VerticalPartition
    split: SplitSpec
    participants: list[Participant]
    server: ServerModel
    server_adam: AdamState
    training: TrainingConfig
    defense: DefenseConfig
    rng: SeededRng
    loss_history: list[float] = field(default_factory=list)
    # End-of-training probabilities on all nodes (the stored P).
    probabilities: DenseMatrix | None = None

    @property
    def k(self) -> int:
        return len(self.participants)

    @property
    def embedding_dim(self) -> int:
        return self.participants[0].model.embedding_dim

    @property
    def labels(self) -> torch.Tensor:
        return self.graph.labels

    @property
    def upload_defense(self) -> UploadDefense:
        return UploadDefense(self.defense, self.embedding_dim)

    def slice_of(self, index: int) -> slice:
        d = self.embedding_dim
        return slice(index * d, (index + 1) * d)

    def upload(self, index: int, h_local: DenseMatrix) -> DenseMatrix:
        """Inference-time upload; DP noise for a participant is drawn from a fixed stream."""
        return self.upload_defense.apply(h_local, self.rng.derive("defense", "inference", index))

    def uploads(self, overrides: dict[int, DenseMatrix] | None = None) -> list[DenseMatrix]:
        overrides = overrides or {}
        return [
            overrides[p.index] if p.index in overrides else self.upload(p.index, p.embed())
            for p in self.participants
        ]

    def global_embeddings(self, overrides: dict[int, DenseMatrix] | None = None) -> DenseMatrix:
        return concat_embeddings(self.uploads(overrides))

    def predict_probabilities(self, overrides: dict[int, DenseMatrix] | None = None) -> DenseMatrix:
        with torch.no_grad():
            return self.server.probabilities(self.global_embeddings(overrides))

    def api(self) -> ProbabilityApi:
        return ProbabilityApi(self.server)

    def oracle(self) -> ServerOracle:
        return ServerOracle(self.server)


def concat_embeddings(parts: Sequence[DenseMatrix]) -> DenseMatrix:
    if len(parts) < 2:
        raise ShapeError(f"at least two participant embeddings are required, got {len(parts)}")
    return concat_columns(parts)


def build_system(
    graph: Graph,
    partition: VerticalPartition,
    split: SplitSpec,
    rng: SeededRng,
    kind: ModelKind = "gcn",
    hidden: int = 32,
    embedding_dim: int = 16,
    training: TrainingConfig | None = None,
    defense: DefenseConfig | None = None,
) -> GvflSystem:
    training = training or TrainingConfig()
    defense = defense or DefenseConfig()
    participants = []
    for i in range(partition.k):
        features = partition.shard_features(graph, i)
        model = LocalModel(kind, features.shape[1], rng.derive("init", "local", i), hidden, embedding_dim)
        participants.append(Participant(i, model, features, partition.edge_shards[i], AdamState(lr=training.lr)))
    server = ServerModel(partition.k * embedding_dim, graph.num_classes, rng.derive("init", "server"),
                         training.server_hidden)
    system = GvflSystem(graph, partition, split, participants, server, AdamState(lr=training.lr),
                        training, defense, rng)
    return system


def server_backward(system: GvflSystem, uploads: Sequence[DenseMatrix]):
    """Server-side half of split backprop.

    Returns the training loss, gradients for the server parameters and, per
    participant, the column slice of dL/dh_global it receives.
    """
    params = list(system.server.parameters())
    with Tape() as tape:
        h_global = tape.watch(concat_embeddings(uploads))
        logits = system.server(h_global)
        loss = cross_entropy_logits(logits, system.labels, system.split.train_index)
    grads = backward(loss, params + [h_global])
    h_grad = grads[-1]
    slices = [h_grad[:, system.slice_of(i)] for i in range(system.k)]
    return loss.detach(), grads[:-1], slices


def train(system: GvflSystem, rng: SeededRng | None = None) -> GvflSystem:
    """Full-batch joint training for ``training.epochs`` epochs; stores P on all nodes."""
    if not system.split.train:
        raise GvflError("the train split is empty")
    rng = rng or system.rng
    defense = system.upload_defense
    server_params = list(system.server.parameters())
    for epoch in range(1, system.training.epochs + 1):
        raw = [p.embed() for p in system.participants]
        uploads = [
            defense.apply(h, rng.derive("defense", "train", epoch, p.index), training=True)
            for p, h in zip(system.participants, raw)
        ]
        loss, server_grads, slices = server_backward(system, uploads)
        value = float(loss)
        if not torch.isfinite(loss):
            raise TrainingDivergedError(epoch, value)
        system.loss_history.append(value)
        adam_step(system.server_adam, server_params, server_grads)
        for p, h, upstream in zip(system.participants, raw, slices):
            local_step(p.model, p.adjacency, p.features, upstream * defense.grad_mask(h), p.adam)
        if system.training.log_every and (epoch == 1 or epoch % system.training.log_every == 0):
            logger.info(f"Epoch {epoch:03d} | train loss {value:.4f}")

    system.probabilities = system.predict_probabilities()
    logger.info(f"Training done: final loss {system.loss_history[-1]:.4f}, "
                f"train acc {accuracy(system, system.split.train):.3f}")
    return system


def accuracy(system: GvflSystem, node_set: Sequence[int], overrides: dict[int, DenseMatrix] | None = None) -> float:
    """Fraction of ``node_set`` whose unique argmax equals the label."""
    nodes = list(node_set)
    if not nodes:
        raise GvflError("accuracy over an empty node set")
    probs = system.predict_probabilities(overrides)
    index = torch.tensor(nodes, dtype=torch.long)
    return float(correct_mask(probs[index], system.labels[index]).double().mean())


def contribution(system: GvflSystem, node_set: Sequence[int] | None = None) -> list[float]:
    """C_i = acc_i / sum_j acc_j, acc_i with every other participant's slice zero-filled."""
    nodes = list(system.split.test if node_set is None else node_set)
    uploads = system.uploads()
    accs = []
    for i in range(system.k):
        overrides = {j: torch.zeros_like(h) for j, h in enumerate(uploads) if j != i}
        overrides[i] = uploads[i]
        accs.append(accuracy(system, nodes, overrides))
    total = sum(accs)
    if total == 0:
        raise GvflError("every participant has zero stand-alone accuracy; contribution undefined")
    return [a / total for a in accs]
