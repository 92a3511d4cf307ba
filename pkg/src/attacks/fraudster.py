"""Fraudster attack: steal embeddings, fit a shadow server, add FGSM noise,
then pick edge flips that pull the target's local embedding toward the
noise-added guidance."""
import logging
from dataclasses import dataclass, field
from typing import Sequence

import torch
from torch import nn

from src.errors import AttackError, ShapeError
from src.evaluation import AttackReport, TargetSelection
from src.federation import GvflSystem, ProbabilityApi, ServerOracle
from src.models import LocalModel, ServerModel
from src.numerics import (
    DTYPE,
    AdamState,
    DenseMatrix,
    SeededRng,
    SparseSymMatrix,
    Tape,
    adam_step,
    backward,
    concat_columns,
    cross_entropy_logits,
    mse,
)

from .config import AttackConfig
from .edges import EdgeSelection, FlipScoring, candidate_pairs, greedy_flips
from .evaluation import PerturbationEvaluator, attacked_accuracy, labelled_targets, run_targets

logger = logging.getLogger(__name__)


class Grn(nn.Module):
    """Generative regression network: K·d -> 512 -> 256 -> (K-1)·d with ReLU."""

    def __init__(self, k: int, d: int, rng: SeededRng, hidden: Sequence[int] = (512, 256)):
        super().__init__()
        widths = [k * d, *hidden, (k - 1) * d]
        generator = rng.torch()
        layers: list[nn.Module] = []
        for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
            linear = nn.Linear(a, b, dtype=DTYPE)
            with torch.no_grad():
                nn.init.xavier_uniform_(linear.weight, generator=generator)
                linear.bias.zero_()
            layers.append(linear)
            if i < len(widths) - 2:
                layers.append(nn.ReLU())
        self.layers = nn.Sequential(*layers)

    def forward(self, h_in: DenseMatrix) -> DenseMatrix:
        return self.layers(h_in)


def assemble_fake(generated: DenseMatrix, h_m: DenseMatrix, malicious: int) -> DenseMatrix:
    """Place the attacker's own h_m in its slot, generated slices elsewhere."""
    d = h_m.shape[1]
    blocks = list(torch.split(generated, d, dim=1))
    blocks.insert(malicious, h_m)
    return concat_columns(blocks)


@dataclass
class StealResult:
    h_fake: DenseMatrix
    # L_GRN before each update; the last entry is the loss of the returned h_fake.
    losses: list[float] = field(default_factory=list)


def _query_gradient(
    api: ProbabilityApi,
    generated: DenseMatrix,
    h_m: DenseMatrix,
    P: DenseMatrix,
    malicious: int,
    directions: int,
    step: float,
    generator: torch.Generator,
) -> DenseMatrix:
    """Estimate dL_GRN/d(generated) from probability queries only.

    L_GRN separates over nodes, so each row's gradient is estimated from
    antithetic random-direction differences of that row's squared error.
    """
    scale = 1.0 / P.numel()

    def row_losses(g: DenseMatrix) -> DenseMatrix:
        return ((api.query(assemble_fake(g, h_m, malicious)) - P) ** 2).sum(dim=1, keepdim=True)

    estimate = torch.zeros_like(generated)
    for _ in range(directions):
        u = torch.randn(generated.shape, generator=generator, dtype=DTYPE)
        delta = row_losses(generated + step * u) - row_losses(generated - step * u)
        estimate += delta / (2.0 * step) * u
    return estimate * (scale / directions)


def steal_embeddings(
    api: ProbabilityApi,
    h_m: DenseMatrix,
    P: DenseMatrix,
    malicious: int,
    rng: SeededRng,
    iters: int = 200,
    lr: float = 0.001,
    mode: str = "autograd",
    query_directions: int = 16,
    query_step: float = 1e-3,
) -> StealResult:
    """Train the GRN so that S(h_fake) matches the stored probabilities P (MSE).

    ``autograd`` back-propagates through the fixed server function and needs a
    ``ServerOracle``; ``query`` estimates the same gradient from probability
    queries alone. The returned h_fake is the lowest-loss iterate.
    """
    d = h_m.shape[1]
    if api.in_width % d or api.in_width // d < 2:
        raise ShapeError(f"API width {api.in_width} is not K·d for d={d}, K >= 2")
    k = api.in_width // d
    if not 0 <= malicious < k:
        raise ShapeError(f"malicious slot {malicious} out of range for K={k}")
    if P.shape != (h_m.shape[0], api.num_classes):
        raise ShapeError(f"P has shape {tuple(P.shape)}, expected {(h_m.shape[0], api.num_classes)}")
    if mode not in ("autograd", "query"):
        raise ValueError(f"unknown stealing mode {mode!r}")
    if mode == "autograd" and not isinstance(api, ServerOracle):
        raise AttackError("autograd stealing needs a ServerOracle; use mode='query' with a ProbabilityApi")

    # One noise draw feeds the generator for the whole run.
    noise = torch.randn(h_m.shape[0], (k - 1) * d, generator=rng.derive("noise").torch(), dtype=DTYPE)
    h_in = concat_columns([noise, h_m])
    grn = Grn(k, d, rng.derive("grn"))
    params = list(grn.parameters())
    adam = AdamState(lr=lr)
    direction_stream = rng.derive("directions").torch()
    result = StealResult(h_fake=h_m)
    best_loss, best_fake = float("inf"), h_m

    def current_loss() -> float:
        with torch.no_grad():
            return float(mse(api.query(assemble_fake(grn(h_in), h_m, malicious)), P))

    for it in range(iters):
        with Tape():
            generated = grn(h_in)
            if mode == "autograd":
                loss = mse(api.probabilities(assemble_fake(generated, h_m, malicious)), P)
                grads = backward(loss, params)
                value = float(loss)
            else:
                value = current_loss()
                seed = _query_gradient(api, generated.detach(), h_m, P, malicious,
                                       query_directions, query_step, direction_stream)
                grads = backward(generated, params, seed=seed)
        result.losses.append(value)
        if value < best_loss:
            best_loss, best_fake = value, assemble_fake(generated.detach(), h_m, malicious)
        adam_step(adam, params, grads)
        if it % 50 == 0:
            logger.info(f"GRN iter {it:03d} | L_GRN {value:.6f}")

    final = current_loss()
    if final < best_loss:
        best_loss = final
        with torch.no_grad():
            best_fake = assemble_fake(grn(h_in), h_m, malicious)
    result.losses.append(best_loss)
    result.h_fake = best_fake
    logger.info(f"Stealing done: L_GRN {result.losses[0]:.6f} -> {best_loss:.6f}, {api.queries} rows queried")
    return result


@dataclass
class ShadowResult:
    shadow: ServerModel
    losses: list[float] = field(default_factory=list)


def train_shadow(
    h_fake: DenseMatrix,
    P: DenseMatrix,
    rng: SeededRng,
    iters: int = 200,
    lr: float = 0.01,
    hidden: Sequence[int] = (32,),
) -> ShadowResult:
    """Fit a server-shaped MLP so that softmax(S~(h_fake)) matches P (MSE)."""
    if h_fake.shape[0] != P.shape[0]:
        raise ShapeError(f"h_fake has {h_fake.shape[0]} rows, P has {P.shape[0]}")
    shadow = ServerModel(h_fake.shape[1], P.shape[1], rng, hidden)
    params = list(shadow.parameters())
    adam = AdamState(lr=lr)
    result = ShadowResult(shadow)
    inputs = h_fake.detach()
    for _ in range(iters):
        with Tape():
            loss = mse(shadow.probabilities(inputs), P)
        result.losses.append(float(loss))
        adam_step(adam, params, backward(loss, params))
    with torch.no_grad():
        result.losses.append(float(mse(shadow.probabilities(inputs), P)))
    logger.info(f"Shadow done: L_shadow {result.losses[0]:.6f} -> {result.losses[-1]:.6f}")
    return result


def shadow_agreement(shadow: ServerModel, api: ProbabilityApi, h_fake: DenseMatrix) -> float:
    """Fraction of rows where the shadow and the real server pick the same class on h_fake."""
    with torch.no_grad():
        mimic = shadow(h_fake).argmax(dim=1)
    return float((mimic == api.query(h_fake).argmax(dim=1)).double().mean())


def add_noise(shadow: ServerModel, h_row: DenseMatrix, attack_label: int, epsilon: float) -> DenseMatrix:
    """FGSM step h + ε·sign(dL_atk/dh) that increases the shadow's loss on ``attack_label``."""
    if not 0.0 <= epsilon <= 1.0:
        raise AttackError(f"epsilon must lie in [0, 1], got {epsilon}")
    if epsilon == 0.0:
        return h_row.detach().clone()
    with Tape() as tape:
        h = tape.watch(h_row.reshape(1, -1))
        loss = cross_entropy_logits(shadow(h), torch.tensor([attack_label]), torch.tensor([0]))
    (grad,) = backward(loss, [h])
    return (h + epsilon * torch.sign(grad)).detach().reshape(h_row.shape)


def select_edges(
    model: LocalModel,
    adjacency: SparseSymMatrix,
    features: DenseMatrix,
    target: int,
    guidance: DenseMatrix,
    budget: int,
    candidates: Sequence[tuple[int, int]] | None = None,
    scoring: FlipScoring = "literal",
) -> EdgeSelection:
    """Flip ``budget`` pairs to minimise L_t = (1/d)·Σ_i (f(Â, X)[v_t]_i - guidance_i)²."""
    guidance = guidance.reshape(1, -1)
    if guidance.shape[1] != model.embedding_dim:
        raise ShapeError(f"guidance has {guidance.shape[1]} entries, embedding dim is {model.embedding_dim}")
    if candidates is None:
        candidates = candidate_pairs(adjacency.n, target, "target")

    def guidance_loss(embeddings: DenseMatrix) -> torch.Tensor:
        return mse(embeddings[target:target + 1], guidance)

    return greedy_flips(model, adjacency, features, guidance_loss, candidates, budget, maximize=False,
                        scoring=scoring)


def run_attack(
    system: GvflSystem,
    malicious: int,
    targets: TargetSelection | Sequence[int],
    epsilon: float,
    budget: int,
    rng: SeededRng,
    config: AttackConfig | None = None,
    test_nodes: Sequence[int] | None = None,
    jobs: int = 1,
) -> AttackReport:
    """Steal, shadow, perturb and rewire for every target, scored against the real server."""
    config = (config or AttackConfig(method="fraudster")).model_copy(update={"epsilon": epsilon, "budget": budget})
    evaluator = PerturbationEvaluator(system, malicious)
    participant = evaluator.participant
    api = system.oracle() if config.stealing == "autograd" else system.api()
    P = system.probabilities
    h_m = evaluator.uploads[malicious]

    stolen = steal_embeddings(api, h_m, P, malicious, rng.derive("steal"), config.grn_iters, config.grn_lr,
                              config.stealing, config.query_directions, config.query_step)
    shadowing = train_shadow(stolen.h_fake, P, rng.derive("shadow"), config.shadow_iters, config.lr,
                             system.training.server_hidden)
    shadow = shadowing.shadow
    # Labels are unknown to the attacker; the server's own prediction stands in for y_t.
    attack_labels = P.argmax(dim=1)
    columns = system.slice_of(malicious)

    def attack_one(target: int, group: str):
        noisy = add_noise(shadow, stolen.h_fake[target], int(attack_labels[target]), config.epsilon)
        if float((noisy - stolen.h_fake[target]).abs().max()) > config.epsilon + 1e-12:
            raise AttackError(f"FGSM noise for target {target} exceeds epsilon={config.epsilon}")
        # The FGSM offset on the malicious slot, applied to the raw local output.
        guidance = evaluator.raw_embeddings[target] + (noisy - stolen.h_fake[target])[columns]
        selection = select_edges(participant.model, participant.adjacency, participant.features, target,
                                 guidance, config.budget, candidate_pairs(system.graph.n, target, config.candidates),
                                 config.flip_scoring)
        return evaluator.outcome(target, group, selection.adjacency, selection.flips, config.budget,
                                 selection.losses)

    if isinstance(targets, TargetSelection):
        labelled = labelled_targets(targets)
    else:
        labelled = [(int(v), "given") for v in targets]
    outcomes = run_targets(labelled, attack_one, jobs)
    report = AttackReport(
        method="fraudster",
        epsilon=config.epsilon,
        budget=config.budget,
        malicious=malicious,
        targets=outcomes,
        accuracy_targets=attacked_accuracy(outcomes),
        grn_loss=stolen.losses,
        shadow_loss=shadowing.losses,
        shadow_agreement=shadow_agreement(shadow, api, stolen.h_fake),
    )
    if test_nodes:
        test_outcomes = run_targets([(int(v), "test") for v in test_nodes], attack_one, jobs)
        report.accuracy_test = attacked_accuracy(test_outcomes)
    report.queries = api.queries
    logger.info(f"Fraudster: target accuracy {report.accuracy_targets:.3f}"
                + (f", test accuracy {report.accuracy_test:.3f}" if report.accuracy_test is not None else ""))
    return report
