"""Dense and sparse-symmetric matrix primitives in float64.

All primitives are plain torch ops, so anything computed inside a ``Tape``
is differentiable with respect to watched leaves.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn

from src.errors import ShapeError

DTYPE = torch.float64

# A DenseMatrix is a 2-D float64 tensor; the alias documents intent.
DenseMatrix = torch.Tensor


def dense(data, rows: int | None = None, cols: int | None = None) -> DenseMatrix:
    matrix = torch.as_tensor(data, dtype=DTYPE)
    if rows is not None and cols is not None:
        matrix = matrix.reshape(rows, cols)
    if matrix.dim() != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {tuple(matrix.shape)}")
    check_finite(matrix)
    return matrix


def check_finite(matrix: torch.Tensor, what: str = "matrix") -> None:
    if not bool(torch.isfinite(matrix).all()):
        raise ValueError(f"{what} contains NaN or Inf")


def glorot_uniform(rows: int, cols: int, generator: torch.Generator) -> DenseMatrix:
    return nn.init.xavier_uniform_(torch.empty(rows, cols, dtype=DTYPE), generator=generator)


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Symmetric matrix stored as upper-triangular coordinates (row <= col).

    Coordinates are unique and sorted by (row, col). ``values`` may be a leaf
    that requires grad; every derived quantity then stays differentiable.
    """

    n: int
    rows: torch.Tensor
    cols: torch.Tensor
    values: torch.Tensor

    @classmethod
    def from_pairs(
        cls,
        n: int,
        pairs: Iterable[tuple[int, int]] | np.ndarray,
        values: Sequence[float] | torch.Tensor | None = None,
    ) -> "SparseSymMatrix":
        index = torch.as_tensor(np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs,
                                           dtype=np.int64).reshape(-1, 2))
        if index.numel() and (int(index.min()) < 0 or int(index.max()) >= n):
            raise ShapeError(f"coordinate out of range for n={n}")
        if values is None:
            vals = torch.ones(index.shape[0], dtype=DTYPE)
        else:
            vals = torch.as_tensor(values, dtype=DTYPE).reshape(-1)
            if vals.shape[0] != index.shape[0]:
                raise ShapeError("pairs and values differ in length")
        lo = torch.minimum(index[:, 0], index[:, 1])
        hi = torch.maximum(index[:, 0], index[:, 1])
        keys = lo * n + hi
        # Duplicates keep their first value.
        unique, inverse = torch.unique(keys, sorted=True, return_inverse=True)
        first = torch.full((unique.shape[0],), keys.shape[0], dtype=torch.long)
        first = first.scatter_reduce(0, inverse, torch.arange(keys.shape[0]), reduce="amin")
        return cls(n, unique // n, unique % n, vals[first])

    @classmethod
    def empty(cls, n: int) -> "SparseSymMatrix":
        none = torch.zeros(0, dtype=torch.long)
        return cls(n, none, none.clone(), torch.zeros(0, dtype=DTYPE))

    @cached_property
    def keys(self) -> torch.Tensor:
        return self.rows * self.n + self.cols

    @property
    def nnz(self) -> int:
        return int(self.rows.shape[0])

    @property
    def num_edges(self) -> int:
        """Off-diagonal stored entries with a nonzero value."""
        off = self.rows != self.cols
        return int((self.values.detach()[off] != 0).sum())

    def position(self, u: int, v: int) -> int | None:
        key = min(u, v) * self.n + max(u, v)
        at = int(torch.searchsorted(self.keys, torch.tensor([key]))[0])
        if at < self.nnz and int(self.keys[at]) == key:
            return at
        return None

    def get(self, u: int, v: int) -> float:
        at = self.position(u, v)
        return 0.0 if at is None else float(self.values[at])

    def expanded(self) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Full coordinate list: off-diagonal entries mirrored, diagonal once."""
        off = self.rows != self.cols
        r = torch.cat([self.rows, self.cols[off]])
        c = torch.cat([self.cols, self.rows[off]])
        v = torch.cat([self.values, self.values[off]])
        return r, c, v

    def to_dense(self) -> DenseMatrix:
        r, c, v = self.expanded()
        out = torch.zeros(self.n, self.n, dtype=DTYPE)
        return out.index_put((r, c), v, accumulate=True)

    def edge_pairs(self) -> list[tuple[int, int]]:
        off = (self.rows != self.cols) & (self.values.detach() != 0)
        return list(zip(self.rows[off].tolist(), self.cols[off].tolist()))

    def neighbors(self, u: int) -> list[int]:
        hit = ((self.rows == u) | (self.cols == u)) & (self.rows != self.cols) & (self.values.detach() != 0)
        other = torch.where(self.rows[hit] == u, self.cols[hit], self.rows[hit])
        return sorted(other.tolist())

    def row_sums(self) -> torch.Tensor:
        r, _, v = self.expanded()
        return torch.zeros(self.n, dtype=v.dtype).index_add(0, r, v)

    def with_values(self, values: torch.Tensor) -> "SparseSymMatrix":
        if values.shape != self.values.shape:
            raise ShapeError("replacement values must match the stored coordinates")
        return SparseSymMatrix(self.n, self.rows, self.cols, values)

    def detached(self) -> "SparseSymMatrix":
        return self.with_values(self.values.detach())

    def with_pairs(self, pairs: Sequence[tuple[int, int]]) -> tuple["SparseSymMatrix", torch.Tensor]:
        """Store ``pairs`` explicitly (zero if absent) and return their positions."""
        extra = SparseSymMatrix.from_pairs(self.n, pairs, torch.zeros(len(pairs), dtype=DTYPE))
        missing = ~torch.isin(extra.keys, self.keys)
        keys = torch.cat([self.keys, extra.keys[missing]])
        values = torch.cat([self.values.detach(), extra.values[missing]])
        order = torch.argsort(keys)
        keys, values = keys[order], values[order]
        merged = SparseSymMatrix(self.n, keys // self.n, keys % self.n, values)
        wanted = torch.tensor([min(u, v) * self.n + max(u, v) for u, v in pairs], dtype=torch.long)
        return merged, torch.searchsorted(merged.keys, wanted)

    def toggled(self, u: int, v: int) -> "SparseSymMatrix":
        """Binary flip of the symmetric pair (u, v): A_uv <- 1 - A_uv."""
        if u == v:
            raise ShapeError("self-loops cannot be toggled")
        at = self.position(u, v)
        if at is not None and float(self.values[at]) != 0.0:
            keep = torch.ones(self.nnz, dtype=torch.bool)
            keep[at] = False
            return SparseSymMatrix(self.n, self.rows[keep], self.cols[keep], self.values.detach()[keep])
        base = self.detached()
        if at is not None:
            values = base.values.clone()
            values[at] = 1.0
            return base.with_values(values)
        merged, positions = base.with_pairs([(u, v)])
        values = merged.values.clone()
        values[positions[0]] = 1.0
        return merged.with_values(values)

    def differs_from(self, other: "SparseSymMatrix") -> int:
        """||self - other||_0 over the full symmetric matrix."""
        keys = torch.cat([self.keys, other.keys]).unique()
        a = torch.zeros(keys.shape[0], dtype=DTYPE)
        b = torch.zeros(keys.shape[0], dtype=DTYPE)
        a[torch.searchsorted(keys, self.keys)] = self.values.detach()
        b[torch.searchsorted(keys, other.keys)] = other.values.detach()
        changed = a != b
        diagonal = (keys // self.n) == (keys % self.n)
        return int((changed & diagonal).sum()) + 2 * int((changed & ~diagonal).sum())

    def equals(self, other: "SparseSymMatrix") -> bool:
        return self.n == other.n and self.differs_from(other) == 0


def matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    if a.dim() != 2 or b.dim() != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {tuple(a.shape)} x {tuple(b.shape)}")
    return a @ b


def spmm(s: SparseSymMatrix, m: DenseMatrix) -> DenseMatrix:
    if m.dim() != 2 or s.n != m.shape[0]:
        raise ShapeError(f"spmm shape mismatch: n={s.n} x {tuple(m.shape)}")
    r, c, v = s.expanded()
    out = torch.zeros(s.n, m.shape[1], dtype=DTYPE)
    return out.index_add(0, r, v.unsqueeze(1) * m[c])


def concat_columns(parts: Sequence[DenseMatrix]) -> DenseMatrix:
    if len({p.shape[0] for p in parts}) > 1:
        raise ShapeError(f"row mismatch in concatenation: {[tuple(p.shape) for p in parts]}")
    return torch.cat(list(parts), dim=1)


def row_softmax(m: DenseMatrix) -> DenseMatrix:
    shifted = m - m.max(dim=1, keepdim=True).values.detach()
    e = shifted.exp()
    return e / e.sum(dim=1, keepdim=True)


def _check_labels(labels: torch.Tensor, num_classes: int) -> None:
    if labels.numel() and (int(labels.min()) < 0 or int(labels.max()) >= num_classes):
        raise ShapeError(f"label out of range [0, {num_classes})")


def cross_entropy(probs: DenseMatrix, labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """-sum over masked rows of ln probs[l, y_l]."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    mask = torch.as_tensor(mask, dtype=torch.long)
    _check_labels(labels[mask], probs.shape[1])
    picked = probs[mask, labels[mask]]
    return -torch.log(picked.clamp_min(torch.finfo(DTYPE).tiny)).sum()


def cross_entropy_logits(logits: DenseMatrix, labels: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Same loss as ``cross_entropy`` composed with row_softmax, computed stably from logits."""
    labels = torch.as_tensor(labels, dtype=torch.long)
    mask = torch.as_tensor(mask, dtype=torch.long)
    _check_labels(labels[mask], logits.shape[1])
    log_probs = torch.log_softmax(logits[mask], dim=1)
    return -log_probs.gather(1, labels[mask].unsqueeze(1)).sum()


def mse(a: DenseMatrix, b: DenseMatrix) -> torch.Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mse shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return ((a - b) ** 2).mean()
