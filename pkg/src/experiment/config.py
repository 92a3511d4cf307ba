"""Experiment configuration: a TOML file validated into pydantic models.

Schema (version 1)::

    name = "cora-gcn"
    seeds = [0, 1, 2]
    output_dir = "runs/cora-gcn"      # optional

    [dataset]
    name = "cora"
    path = "cora"                     # dir with edges.tsv / features.csv / labels.csv,
                                      # relative paths resolve under GVFL_DATA_DIR
    # or: [dataset.synthetic] blocks = [20, 20]  intra_p = 0.9  inter_p = 0.02  feat_dim = 8

    [partition]  participants = 2   mode = "dual" | "features"
    [split]      per_class_train = 20   val_size = 500   test_size = 1000
    [model]      kind = "gcn" | "sgc"   hidden = 32   embedding_dim = 16
    [training]   epochs = 200   lr = 0.01   server_hidden = [32]
    [attack]     method = "none" | "fraudster" | "rnd" | "fga"   epsilon = 0.004   budget = 1 ...
    [defense]    kind = "none" | "dp" | "topk"   beta = 0.0   k = 16
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.attacks import AttackConfig
from src.config import settings
from src.defenses import DefenseConfig
from src.errors import ConfigError
from src.federation import TrainingConfig
from src.graph import EDGES_FILE, FEATURES_FILE, LABELS_FILE

SCHEMA_VERSION = 1


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticGraphConfig(StrictModel):
    blocks: list[int] = Field(default_factory=lambda: [20, 20])
    intra_p: float = Field(0.9, ge=0.0, le=1.0)
    inter_p: float = Field(0.02, ge=0.0, le=1.0)
    feat_dim: int = Field(8, ge=1)
    noise: float = Field(0.1, ge=0.0)
    seed: int = 0


class DatasetConfig(StrictModel):
    name: str = "synthetic"
    path: Path | None = None
    # Featureless graphs (e.g. Pol.Blogs): one-hot identity features of width n.
    identity_features: bool = False
    synthetic: SyntheticGraphConfig | None = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.path is None) == (self.synthetic is None):
            raise ValueError("dataset needs exactly one of 'path' or 'synthetic'")
        if self.path is not None:
            root = self.resolved_path
            needed = [EDGES_FILE, LABELS_FILE] + ([] if self.identity_features else [FEATURES_FILE])
            missing = [name for name in needed if not (root / name).is_file()]
            if missing:
                raise ValueError(f"dataset directory {root} is missing {missing}")
        return self

    @property
    def resolved_path(self) -> Path:
        return settings.resolve_data_path(self.path)


class PartitionConfig(StrictModel):
    participants: int = Field(2, ge=2)
    mode: Literal["dual", "features"] = "dual"


class SplitConfig(StrictModel):
    per_class_train: int = Field(20, ge=1)
    val_size: int = Field(500, ge=0)
    test_size: int = Field(1000, ge=1)


class ModelConfig(StrictModel):
    kind: Literal["gcn", "sgc"] = "gcn"
    hidden: int = Field(32, ge=1)
    embedding_dim: int = Field(16, ge=1)


class ExperimentConfig(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "experiment"
    seeds: list[int] = Field(default_factory=lambda: list(range(10)), min_length=1)
    output_dir: Path | None = None
    dataset: DatasetConfig = Field(default_factory=lambda: DatasetConfig(synthetic=SyntheticGraphConfig()))
    partition: PartitionConfig = Field(default_factory=PartitionConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    attack: AttackConfig = Field(default_factory=AttackConfig)
    defense: DefenseConfig = Field(default_factory=DefenseConfig)
    # Extra outputs
    centralized: bool = False
    export_embeddings: bool = False
    save_checkpoints: bool = False

    @model_validator(mode="after")
    def _consistent(self):
        if self.partition.mode == "dual" and self.partition.participants != 2:
            raise ValueError("dual-split partitioning requires exactly 2 participants")
        if self.attack.malicious >= self.partition.participants:
            raise ValueError(f"attack.malicious={self.attack.malicious} but only "
                             f"{self.partition.participants} participants")
        if self.defense.kind == "topk" and self.defense.k > self.model.embedding_dim:
            raise ValueError(f"defense.k={self.defense.k} exceeds embedding_dim={self.model.embedding_dim}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be unique")
        return self

    @property
    def out_dir(self) -> Path:
        return self.output_dir or settings.output_dir / self.name


def validate_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config:\n{e}") from None


def load_config(path: Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return validate_config(data)


def with_updates(config: ExperimentConfig, updates: dict) -> ExperimentConfig:
    """Deep-merge ``updates`` into the config and re-validate."""
    data = config.model_dump(mode="json")
    for dotted, value in updates.items():
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    return validate_config(data)
