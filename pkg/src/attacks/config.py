from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

AttackMethod = Literal["none", "fraudster", "rnd", "fga"]


class AttackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: AttackMethod = "none"
    epsilon: float = Field(0.004, ge=0.0, le=1.0)
    budget: int = Field(1, ge=1)
    malicious: int = Field(0, ge=0)

    # Stealing and shadow training (fraudster)
    grn_iters: int = Field(200, ge=1)
    shadow_iters: int = Field(200, ge=1)
    lr: float = Field(0.01, gt=0.0)
    grn_lr: float = Field(0.001, gt=0.0)
    stealing: Literal["autograd", "query"] = "autograd"
    query_directions: int = Field(16, ge=1)
    query_step: float = Field(1e-3, gt=0.0)

    # Edge selection
    candidates: Literal["target", "all"] = "target"
    flip_scoring: Literal["literal", "direction"] = "literal"

    # Surrogate for the transfer baselines
    surrogate_epochs: int = Field(200, ge=1)

    # Target protocol: highest / lowest / random correct test nodes
    highest_targets: int = Field(20, ge=0)
    lowest_targets: int = Field(20, ge=0)
    random_targets: int = Field(60, ge=0)
    # Also attack every test node and report accuracy over the whole test set.
    evaluate_test_nodes: bool = True
