from .api import ProbabilityApi, ServerOracle, predict
from .checkpoint import restore_system, save_system
from .system import (
    GvflSystem,
    Participant,
    TrainingConfig,
    accuracy,
    build_system,
    concat_embeddings,
    contribution,
    server_backward,
    train,
)

__all__ = [
    "ProbabilityApi",
    "ServerOracle",
    "predict",
    "restore_system",
    "save_system",
    "GvflSystem",
    "Participant",
    "TrainingConfig",
    "accuracy",
    "build_system",
    "concat_embeddings",
    "contribution",
    "server_backward",
    "train",
]
