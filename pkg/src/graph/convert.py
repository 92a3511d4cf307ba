"""Conversion from the citation-graph distribution layout (``.content`` / ``.cites``)."""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.errors import GraphParseError

logger = logging.getLogger(__name__)

EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"


@dataclass(frozen=True)
class ConvertSummary:
    nodes: int
    edges_written: int
    edges_dropped: int
    features: int
    classes: int


def convert_citation(content_path: Path, cites_path: Path, out_dir: Path) -> ConvertSummary:
    """Rewrite ``<paper> <f_1..f_F> <label>`` / ``<cited> <citing>`` files as the
    ``edges.tsv`` + ``features.csv`` + ``labels.csv`` layout.

    Citations that reference papers missing from the content file are dropped.
    """
    content_path, cites_path, out_dir = Path(content_path), Path(cites_path), Path(out_dir)
    ids: dict[str, int] = {}
    rows: list[list[float]] = []
    labels: list[str] = []
    with open(content_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise GraphParseError(content_path, lineno, "expected '<id> <features...> <label>'")
            if parts[0] in ids:
                raise GraphParseError(content_path, lineno, f"duplicate paper id {parts[0]!r}")
            if rows and len(parts) - 2 != len(rows[0]):
                raise GraphParseError(content_path, lineno, "inconsistent feature count")
            try:
                rows.append([float(x) for x in parts[1:-1]])
            except ValueError:
                raise GraphParseError(content_path, lineno, "non-numeric feature value") from None
            ids[parts[0]] = len(ids)
            labels.append(parts[-1])

    edges: list[tuple[int, int]] = []
    dropped = 0
    with open(cites_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise GraphParseError(cites_path, lineno, "expected '<cited> <citing>'")
            if parts[0] not in ids or parts[1] not in ids:
                dropped += 1
                continue
            edges.append((ids[parts[0]], ids[parts[1]]))
    if dropped:
        logger.warning(f"Dropped {dropped} citations referencing unknown papers")

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / EDGES_FILE, "w", encoding="utf-8") as f:
        f.writelines(f"{u}\t{v}\n" for u, v in edges)
    np.savetxt(out_dir / FEATURES_FILE, np.asarray(rows, dtype=np.float64), fmt="%.17g", delimiter=",")
    with open(out_dir / LABELS_FILE, "w", encoding="utf-8") as f:
        f.writelines(f"{i},{label}\n" for i, label in enumerate(labels))

    summary = ConvertSummary(len(ids), len(edges), dropped, len(rows[0]) if rows else 0, len(set(labels)))
    logger.info(f"Converted {content_path.name}: {summary}")
    return summary
