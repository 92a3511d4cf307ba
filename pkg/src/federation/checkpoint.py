"""Trained-system checkpoints: one ``.params`` file per participant plus the server."""
import logging
from pathlib import Path

from src.errors import GvflError
from src.models import load_params, save_params

from .system import GvflSystem

logger = logging.getLogger(__name__)

SERVER_FILE = "server.params"


def participant_file(index: int) -> str:
    return f"participant-{index}.params"


def save_system(system: GvflSystem, directory: Path) -> Path:
    directory = Path(directory)
    for p in system.participants:
        save_params(directory / participant_file(p.index), p.model,
                    {"participant": p.index, "kind": p.model.kind, "columns": list(system.partition.feature_columns[p.index])})
    save_params(directory / SERVER_FILE, system.server,
                {"k": system.k, "num_classes": system.graph.num_classes, "loss_history": system.loss_history})
    logger.info(f"Checkpoint written to {directory}")
    return directory


def restore_system(system: GvflSystem, directory: Path) -> GvflSystem:
    """Load parameters saved by :func:`save_system` into a freshly built system.

    The system must have been built from the same graph, partition and model
    shape; the stored P is recomputed from the restored parameters.
    """
    directory = Path(directory)
    if not (directory / SERVER_FILE).is_file():
        raise GvflError(f"no checkpoint in {directory}")
    for p in system.participants:
        meta = load_params(directory / participant_file(p.index), p.model)
        if meta.get("columns") != list(system.partition.feature_columns[p.index]):
            raise GvflError(f"checkpoint for participant {p.index} was taken on a different partition")
    meta = load_params(directory / SERVER_FILE, system.server)
    system.loss_history = list(meta.get("loss_history", []))
    system.probabilities = system.predict_probabilities()
    logger.info(f"Checkpoint restored from {directory}")
    return system
