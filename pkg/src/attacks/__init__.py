from .baselines import Surrogate, SurrogateResult, fga_attack, fit_classifier, rnd_attack, run_baseline, train_surrogate
from .config import AttackConfig, AttackMethod
from .edges import EdgeSelection, candidate_pairs, greedy_flips, target_candidates
from .evaluation import PerturbationEvaluator, attacked_accuracy
from .fraudster import (
    Grn,
    ShadowResult,
    StealResult,
    add_noise,
    run_attack,
    select_edges,
    shadow_agreement,
    steal_embeddings,
    train_shadow,
)

__all__ = [
    "Surrogate",
    "SurrogateResult",
    "fga_attack",
    "fit_classifier",
    "rnd_attack",
    "run_baseline",
    "train_surrogate",
    "AttackConfig",
    "AttackMethod",
    "EdgeSelection",
    "candidate_pairs",
    "greedy_flips",
    "target_candidates",
    "PerturbationEvaluator",
    "attacked_accuracy",
    "Grn",
    "ShadowResult",
    "StealResult",
    "shadow_agreement",
    "add_noise",
    "run_attack",
    "select_edges",
    "steal_embeddings",
    "train_shadow",
]
