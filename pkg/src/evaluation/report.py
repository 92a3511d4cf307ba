"""Run records, mean±std aggregation tables and file exports."""
import csv
import io
import math
import os
import tempfile
from collections import defaultdict
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np
import torch
from pydantic import BaseModel, Field

from src.errors import GvflError

if TYPE_CHECKING:
    from src.federation import GvflSystem

SCHEMA_VERSION = 1


class TargetOutcome(BaseModel):
    node: int
    group: str
    true_class: int
    flips: list[tuple[int, int]]
    clean_prediction: int
    adversarial_prediction: int
    margin_before: float
    margin_after: float
    success: bool
    guidance_loss: list[float] = Field(default_factory=list)
    # Why the target was left unperturbed, if it was.
    skipped: str | None = None


class AttackReport(BaseModel):
    method: str
    epsilon: float
    budget: int
    malicious: int
    targets: list[TargetOutcome]
    accuracy_targets: float
    accuracy_test: float | None = None
    queries: int = 0
    grn_loss: list[float] = Field(default_factory=list)
    shadow_loss: list[float] = Field(default_factory=list)
    surrogate_agreement: float | None = None
    shadow_agreement: float | None = None


class RunRecord(BaseModel):
    schema_version: int = SCHEMA_VERSION
    dataset: str
    model: str
    method: str
    seed: int
    metrics: dict[str, float]
    config: dict = Field(default_factory=dict)
    train_loss: list[float] = Field(default_factory=list)
    contribution: list[float] = Field(default_factory=list)
    attack: AttackReport | None = None


class AggregateRow(BaseModel):
    dataset: str
    model: str
    method: str
    metric: str
    mean: float
    std: float
    runs: int

    @property
    def cell(self) -> str:
        return f"{self.mean:.3f}±{self.std:.3f}"


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation, independent of value order."""
    n = len(values)
    mean = math.fsum(values) / n
    return mean, math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)


def aggregate(runs: Iterable[RunRecord]) -> list[AggregateRow]:
    groups: dict[tuple[str, str, str], list[RunRecord]] = defaultdict(list)
    for run in runs:
        groups[(run.dataset, run.model, run.method)].append(run)
    if not groups:
        raise GvflError("aggregate needs at least one run")
    rows = []
    for key in sorted(groups):
        members = groups[key]
        metric_names = set(members[0].metrics)
        if any(set(r.metrics) != metric_names or r.schema_version != members[0].schema_version for r in members):
            raise GvflError(f"runs for {key} have inconsistent schemas")
        for metric in sorted(metric_names):
            mean, std = mean_std([r.metrics[metric] for r in members])
            rows.append(AggregateRow(dataset=key[0], model=key[1], method=key[2], metric=metric,
                                     mean=mean, std=std, runs=len(members)))
    return rows


def atomic_write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)
    return path


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_table_csv(rows: Sequence[AggregateRow], path: Path, extra: Mapping[str, str] | None = None) -> Path:
    """Aggregate table; ``std`` is the population standard deviation over seeds."""
    extra = dict(extra or {})
    header = [*extra, "dataset", "model", "method", "metric", "mean", "std", "runs", "cell"]
    body = [[*extra.values(), r.dataset, r.model, r.method, r.metric, repr(r.mean), repr(r.std), r.runs, r.cell]
            for r in rows]
    return atomic_write_text(path, _csv_text(header, body))


def write_json(model: BaseModel, path: Path) -> Path:
    return atomic_write_text(path, model.model_dump_json(indent=2) + "\n")


def write_margins_csv(report: AttackReport, path: Path) -> Path:
    body = [[t.node, t.group, t.true_class, repr(t.margin_before), repr(t.margin_after), int(t.success)]
            for t in report.targets]
    header = ["node", "group", "true_class", "margin_clean", "margin_attacked", "success"]
    return atomic_write_text(path, _csv_text(header, body))


def export_embeddings(
    system: "GvflSystem",
    path: Path,
    adversarial: Mapping[int, torch.Tensor] | None = None,
) -> Path:
    """CSV of node, label, adversarial flag and global embedding e0..e{Kd-1}.

    ``adversarial`` maps a target node to its attacked global embedding row;
    each such node gets a second row flagged 1.
    """
    h = system.global_embeddings()
    width = h.shape[1]
    labels = system.labels.tolist()
    header = ["node", "label", "adversarial", *(f"e{i}" for i in range(width))]
    rows = [[v, labels[v], 0, *(repr(float(x)) for x in h[v])] for v in range(h.shape[0])]
    for v, row in sorted((adversarial or {}).items()):
        rows.append([v, labels[v], 1, *(repr(float(x)) for x in row.flatten())])
    return atomic_write_text(path, _csv_text(header, rows))


def read_embeddings(path: Path) -> tuple[list[tuple[int, int, int]], np.ndarray]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        next(reader)
        keys, vectors = [], []
        for row in reader:
            keys.append((int(row[0]), int(row[1]), int(row[2])))
            vectors.append([float(x) for x in row[3:]])
    return keys, np.asarray(vectors, dtype=np.float64)


def write_sweep_csv(path: Path, axis: str, points: Sequence[tuple[object, Sequence[AggregateRow]]]) -> Path:
    """One aggregate block per swept value, keyed by the value in the leading ``axis`` column."""
    header = [axis, "dataset", "model", "method", "metric", "mean", "std", "runs", "cell"]
    body = [[value, r.dataset, r.model, r.method, r.metric, repr(r.mean), repr(r.std), r.runs, r.cell]
            for value, rows in points for r in rows]
    return atomic_write_text(path, _csv_text(header, body))
