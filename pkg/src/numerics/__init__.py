from .optim import AdamState, adam_step
from .rng import SeededRng
from .tape import Tape, backward
from .tensors import (
    DTYPE,
    DenseMatrix,
    SparseSymMatrix,
    concat_columns,
    cross_entropy,
    cross_entropy_logits,
    dense,
    glorot_uniform,
    matmul,
    mse,
    row_softmax,
    spmm,
)

__all__ = [
    "AdamState",
    "adam_step",
    "SeededRng",
    "Tape",
    "backward",
    "DTYPE",
    "DenseMatrix",
    "SparseSymMatrix",
    "concat_columns",
    "cross_entropy",
    "cross_entropy_logits",
    "dense",
    "glorot_uniform",
    "matmul",
    "mse",
    "row_softmax",
    "spmm",
]
