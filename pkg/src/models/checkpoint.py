"""Parameter dumps: a JSON header line followed by CSV rows.

Layout of a ``.params`` file::

    {"meta": {...}, "tensors": [{"name": "W0", "shape": [rows, cols]}, ...]}
    <rows of W0, comma-separated, %.17g>
    <rows of W1 ...>

Tensors appear in header order; values round-trip exactly.
"""
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import torch
from torch import nn

from src.numerics import DTYPE


def save_params(path: Path, module: nn.Module, meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    state = {name: t.detach() for name, t in module.state_dict().items()}
    header = {
        "meta": meta or {},
        "tensors": [{"name": name, "shape": list(t.shape)} for name, t in state.items()],
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for t in state.values():
            np.savetxt(f, t.reshape(t.shape[0], -1).numpy(), fmt="%.17g", delimiter=",")
    os.replace(tmp, path)
    return path


def read_params(path: Path) -> tuple[dict, dict[str, torch.Tensor]]:
    with open(path, encoding="utf-8") as f:
        header = json.loads(f.readline())
        tensors = {}
        for spec in header["tensors"]:
            rows = spec["shape"][0]
            lines = [f.readline() for _ in range(rows)]
            data = np.asarray([[float(x) for x in line.split(",")] for line in lines], dtype=np.float64)
            tensors[spec["name"]] = torch.tensor(data, dtype=DTYPE).reshape(spec["shape"])
    return header["meta"], tensors


def load_params(path: Path, module: nn.Module) -> dict:
    """Copy tensors from ``path`` into ``module``; returns the stored metadata."""
    meta, tensors = read_params(path)
    module.load_state_dict(tensors)
    return meta
