from .config import ExperimentConfig, load_config, validate_config, with_updates
from .runner import (
    ScenarioResult,
    load_dataset,
    load_records,
    method_label,
    prepare_system,
    report,
    run_scenario,
    run_seed,
    sweep,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "validate_config",
    "with_updates",
    "ScenarioResult",
    "load_dataset",
    "load_records",
    "method_label",
    "prepare_system",
    "report",
    "run_scenario",
    "run_seed",
    "sweep",
]
