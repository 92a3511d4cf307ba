from .metrics import MarginRecord, TargetSelection, classification_margin, correct_mask, margins, select_targets
from .report import (
    AggregateRow,
    AttackReport,
    RunRecord,
    TargetOutcome,
    aggregate,
    atomic_write_text,
    export_embeddings,
    read_embeddings,
    write_json,
    write_margins_csv,
    write_sweep_csv,
    write_table_csv,
)

__all__ = [
    "MarginRecord",
    "TargetSelection",
    "classification_margin",
    "correct_mask",
    "margins",
    "select_targets",
    "AggregateRow",
    "AttackReport",
    "RunRecord",
    "TargetOutcome",
    "aggregate",
    "atomic_write_text",
    "export_embeddings",
    "read_embeddings",
    "write_json",
    "write_margins_csv",
    "write_sweep_csv",
    "write_table_csv",
]
