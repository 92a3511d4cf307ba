"""Vertical partitioning of a graph into participant shards, plus node splits."""
import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import torch

from src.errors import PartitionError
from src.numerics import DenseMatrix, SeededRng, SparseSymMatrix

from .store import Graph

logger = logging.getLogger(__name__)

PartitionMode = Literal["dual", "features"]


@dataclass(frozen=True)
class SplitSpec:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def __post_init__(self):
        if set(self.train) & set(self.val) or set(self.train) & set(self.test) or set(self.val) & set(self.test):
            raise PartitionError("train/val/test node sets must be pairwise disjoint")

    @property
    def train_index(self) -> torch.Tensor:
        return torch.tensor(self.train, dtype=torch.long)


@dataclass(frozen=True, eq=False)
class VerticalPartition:
    """Per-participant feature columns and edge shards.

    In ``features`` mode every shard is the full adjacency; in ``dual`` mode
    the two shards partition the edge set.
    """

    k: int
    mode: PartitionMode
    feature_columns: tuple[tuple[int, ...], ...]
    edge_shards: tuple[SparseSymMatrix, ...]

    @property
    def column_permutation(self) -> list[int]:
        return [c for cols in self.feature_columns for c in cols]

    def shard_features(self, graph: Graph, participant: int) -> DenseMatrix:
        return graph.features[:, list(self.feature_columns[participant])]

    @classmethod
    def from_columns(
        cls,
        graph: Graph,
        columns: Sequence[Sequence[int]],
        edge_shards: Sequence[SparseSymMatrix] | None = None,
    ) -> "VerticalPartition":
        """Explicit column assignment; without edge shards everyone keeps the full graph."""
        flat = sorted(c for cols in columns for c in cols)
        if flat != list(range(graph.num_features)):
            raise PartitionError("feature column lists must partition [0, F_in)")
        if edge_shards is None:
            return cls(len(columns), "features", tuple(tuple(c) for c in columns),
                       tuple(graph.adjacency for _ in columns))
        if len(edge_shards) != len(columns):
            raise PartitionError("one edge shard per participant is required")
        return cls(len(columns), "dual", tuple(tuple(c) for c in columns), tuple(edge_shards))


def partition(graph: Graph, k: int, mode: PartitionMode, rng: SeededRng) -> VerticalPartition:
    if k < 2:
        raise PartitionError(f"at least two participants are required, got {k}")
    if mode == "dual" and k != 2:
        raise PartitionError(f"dual-split mode supports exactly two participants, got {k}")
    if mode not in ("dual", "features"):
        raise PartitionError(f"unknown partition mode {mode!r}")
    if graph.num_features < k:
        raise PartitionError(f"cannot split {graph.num_features} feature columns among {k} participants")

    generator = rng.derive("columns").numpy()
    permuted = generator.permutation(graph.num_features)
    columns = tuple(tuple(sorted(chunk.tolist())) for chunk in np.array_split(permuted, k))

    if mode == "features":
        shards = tuple(graph.adjacency for _ in range(k))
    else:
        edges = np.asarray(graph.adjacency.edge_pairs(), dtype=np.int64).reshape(-1, 2)
        order = rng.derive("edges").numpy().permutation(edges.shape[0])
        shards = tuple(
            SparseSymMatrix.from_pairs(graph.n, edges[chunk]) if chunk.size else SparseSymMatrix.empty(graph.n)
            for chunk in np.array_split(order, 2)
        )
        isolated = [int((shard.row_sums() == 0).sum()) for shard in shards]
        logger.info(f"Dual split: edge shards {[s.num_edges for s in shards]}, isolated nodes {isolated}")

    logger.info(f"Partitioned {graph.name} into {k} participants ({mode}), columns {[len(c) for c in columns]}")
    return VerticalPartition(k, mode, columns, shards)


def make_split(
    graph: Graph,
    rng: SeededRng,
    per_class_train: int = 20,
    val_size: int = 500,
    test_size: int = 1000,
) -> SplitSpec:
    """Stratified train set, then disjoint val/test drawn from the remainder."""
    if per_class_train <= 0:
        raise PartitionError("per_class_train must be positive; the train set would be empty")
    generator = rng.numpy()
    train: list[int] = []
    for c in range(graph.num_classes):
        members = np.asarray(graph.nodes_of_class(c), dtype=np.int64)
        if members.size < per_class_train:
            raise PartitionError(f"class {c} has {members.size} nodes, fewer than {per_class_train}")
        train.extend(generator.permutation(members)[:per_class_train].tolist())
    chosen = set(train)
    rest = np.asarray([v for v in range(graph.n) if v not in chosen], dtype=np.int64)
    if rest.size < val_size + test_size:
        raise PartitionError(f"{rest.size} nodes remain, cannot draw {val_size} val + {test_size} test")
    rest = generator.permutation(rest)
    val = rest[:val_size].tolist()
    test = rest[val_size:val_size + test_size].tolist()
    return SplitSpec(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test)))
