"""Graph container, file ingestion and symmetric normalization."""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from src.errors import GraphParseError, ShapeError
from src.numerics import DTYPE, DenseMatrix, SparseSymMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    adjacency: SparseSymMatrix
    features: DenseMatrix
    labels: torch.Tensor
    num_classes: int
    label_names: tuple[str, ...] = ()
    name: str = "graph"
    # Lines read from the edge file, before deduplication.
    raw_edge_count: int = field(default=0)

    def __post_init__(self):
        if self.adjacency.n != self.n or self.features.shape[0] != self.n or self.labels.shape[0] != self.n:
            raise ShapeError("adjacency, features and labels disagree on the node count")
        if bool((self.adjacency.rows == self.adjacency.cols).any()):
            raise ShapeError("graph adjacency must not store self-loops")
        values = self.adjacency.values.detach()
        if not bool(((values == 0) | (values == 1)).all()):
            raise ShapeError("graph adjacency must be binary")
        if self.n and (int(self.labels.min()) < 0 or int(self.labels.max()) >= self.num_classes):
            raise ShapeError(f"labels must lie in [0, {self.num_classes})")

    @property
    def num_edges(self) -> int:
        return self.adjacency.num_edges

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    def nodes_of_class(self, c: int) -> list[int]:
        return torch.nonzero(self.labels == c).flatten().tolist()

    def summary(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.n,
            "edges": self.num_edges,
            "raw_edges": self.raw_edge_count,
            "features": self.num_features,
            "classes": self.num_classes,
        }


def _read_lines(path: Path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if line:
                yield lineno, line


def _load_labels(path: Path) -> tuple[torch.Tensor, tuple[str, ...]]:
    raw: dict[int, str] = {}
    for lineno, line in _read_lines(path):
        parts = line.split(",")
        if len(parts) != 2:
            raise GraphParseError(path, lineno, "expected 'node_id,label'")
        try:
            node = int(parts[0])
        except ValueError:
            raise GraphParseError(path, lineno, f"bad node id {parts[0]!r}") from None
        if node < 0 or node in raw:
            raise GraphParseError(path, lineno, f"negative or duplicate node id {node}")
        raw[node] = parts[1].strip()
    n = len(raw)
    if sorted(raw) != list(range(n)):
        missing = sorted(set(range(max(raw, default=-1) + 1)) - set(raw))[:5]
        raise GraphParseError(path, 0, f"non-contiguous labels: node ids must cover 0..{n - 1}, missing {missing}")
    names = _sorted_label_names(set(raw.values()))
    index = {name: i for i, name in enumerate(names)}
    labels = torch.tensor([index[raw[i]] for i in range(n)], dtype=torch.long)
    return labels, tuple(names)


def _sorted_label_names(names: set[str]) -> list[str]:
    # Integer labels keep numeric order; anything else sorts lexically.
    try:
        return sorted(names, key=int)
    except ValueError:
        return sorted(names)


def _load_features(path: Path, n: int) -> DenseMatrix:
    rows = []
    width = None
    for lineno, line in _read_lines(path):
        try:
            row = [float(x) for x in line.split(",")]
        except ValueError:
            raise GraphParseError(path, lineno, "non-numeric feature value") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise GraphParseError(path, lineno, f"expected {width} columns, got {len(row)}")
        rows.append(row)
    if len(rows) != n:
        raise GraphParseError(path, len(rows), f"expected {n} feature rows, got {len(rows)}")
    features = torch.tensor(np.asarray(rows, dtype=np.float64), dtype=DTYPE)
    if not bool(torch.isfinite(features).all()):
        raise GraphParseError(path, 0, "features contain NaN or Inf")
    return features


def _load_edges(path: Path, n: int) -> tuple[list[tuple[int, int]], int]:
    pairs = []
    raw = 0
    for lineno, line in _read_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise GraphParseError(path, lineno, "expected 'u<TAB>v'")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(path, lineno, "non-integer node id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphParseError(path, lineno, f"node id out of range [0, {n})")
        raw += 1
        if u != v:
            pairs.append((u, v))
    return pairs, raw


def load_graph(edge_list_path: Path, features_path: Path | None, labels_path: Path, name: str | None = None) -> Graph:
    """Read the three-file layout; ``features_path=None`` yields one-hot identity features."""
    edge_list_path, labels_path = Path(edge_list_path), Path(labels_path)
    labels, names = _load_labels(labels_path)
    n = labels.shape[0]
    if features_path is None:
        features = torch.eye(n, dtype=DTYPE)
    else:
        features = _load_features(Path(features_path), n)
    pairs, raw = _load_edges(edge_list_path, n)
    adjacency = SparseSymMatrix.from_pairs(n, pairs) if pairs else SparseSymMatrix.empty(n)
    graph = Graph(
        n=n,
        adjacency=adjacency,
        features=features,
        labels=labels,
        num_classes=len(names),
        label_names=names,
        name=name or edge_list_path.parent.name,
        raw_edge_count=raw,
    )
    logger.info(f"Loaded graph {graph.summary()}")
    return graph


def normalize(adjacency: SparseSymMatrix) -> SparseSymMatrix:
    """D^-1/2 (A + I) D^-1/2 with D the degree of A + I.

    Degrees are computed from ``adjacency.values``, so when those values are a
    watched leaf the result is differentiable through the degree terms.
    """
    if bool((adjacency.rows == adjacency.cols).any()):
        raise ShapeError("normalize expects an adjacency without stored self-loops")
    n = adjacency.n
    ids = torch.arange(n)
    rows = torch.cat([adjacency.rows, ids])
    cols = torch.cat([adjacency.cols, ids])
    values = torch.cat([adjacency.values, torch.ones(n, dtype=DTYPE)])
    inv_sqrt = (adjacency.row_sums() + 1.0).pow(-0.5)
    scaled = values * inv_sqrt[rows] * inv_sqrt[cols]
    order = torch.argsort(rows * n + cols)
    return SparseSymMatrix(n, rows[order], cols[order], scaled[order])
