"""Scenario runner: per-seed train / attack / defend, JSON records and aggregate tables."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import torch

from src.attacks import PerturbationEvaluator, Surrogate, fit_classifier, run_attack, run_baseline
from src.errors import ConfigError, GvflError
from src.evaluation import (
    AggregateRow,
    AttackReport,
    RunRecord,
    aggregate,
    correct_mask,
    export_embeddings,
    select_targets,
    write_json,
    write_margins_csv,
    write_sweep_csv,
    write_table_csv,
)
from src.federation import GvflSystem, accuracy, build_system, contribution, restore_system, save_system, train
from src.graph import EDGES_FILE, FEATURES_FILE, LABELS_FILE, Graph, load_graph, make_split, partition, synth_sbm
from src.numerics import SeededRng

from .config import DatasetConfig, ExperimentConfig, with_updates

logger = logging.getLogger(__name__)

SweepAxis = Literal["epsilon", "d", "k", "beta", "K"]

# Sweep axis -> dotted config field it overrides
SWEEP_FIELDS: dict[str, str] = {
    "epsilon": "attack.epsilon",
    "d": "model.embedding_dim",
    "k": "defense.k",
    "beta": "defense.beta",
    "K": "partition.participants",
}
INTEGER_AXES = {"d", "k", "K"}

AGGREGATE_FILE = "aggregate.csv"


@dataclass
class ScenarioResult:
    records: list[RunRecord]
    table: list[AggregateRow]
    out_dir: Path


def load_dataset(config: DatasetConfig) -> Graph:
    if config.synthetic is not None:
        s = config.synthetic
        graph = synth_sbm(s.blocks, s.intra_p, s.inter_p, s.feat_dim, SeededRng(s.seed).derive("synthetic"), s.noise)
    else:
        root = config.resolved_path
        features = None if config.identity_features else root / FEATURES_FILE
        graph = load_graph(root / EDGES_FILE, features, root / LABELS_FILE, name=config.name)
    logger.info(f"Dataset {config.name}: {graph.summary()}")
    return graph


def method_label(config: ExperimentConfig) -> str:
    method = "clean" if config.attack.method == "none" else config.attack.method
    return method if config.defense.kind == "none" else f"{method}+{config.defense.kind}"


def centralized_accuracy(graph: Graph, system: GvflSystem, config: ExperimentConfig, rng: SeededRng) -> float:
    """Reference accuracy of one GNN trained on the whole graph and feature matrix."""
    model = Surrogate(config.model.kind, graph.num_features, graph.num_classes, rng,
                      config.model.hidden, config.model.embedding_dim)
    fit_classifier(model, graph.adjacency, graph.features, graph.labels, system.split.train,
                   config.training.epochs, config.training.lr)
    test = torch.tensor(system.split.test, dtype=torch.long)
    with torch.no_grad():
        probs = torch.softmax(model(graph.adjacency, graph.features), dim=1)
    return float(correct_mask(probs[test], graph.labels[test]).double().mean())


def prepare_system(graph: Graph, config: ExperimentConfig, seed: int, checkpoint: Path | None = None) -> GvflSystem:
    rng = SeededRng(seed)
    shards = partition(graph, config.partition.participants, config.partition.mode, rng.derive("partition"))
    split = make_split(graph, rng.derive("split"), config.split.per_class_train, config.split.val_size,
                       config.split.test_size)
    system = build_system(graph, shards, split, rng.derive("system"), config.model.kind, config.model.hidden,
                          config.model.embedding_dim, config.training, config.defense)
    if checkpoint is not None:
        return restore_system(system, checkpoint / f"seed-{seed}")
    return train(system)


def attack_system(system: GvflSystem, config: ExperimentConfig, rng: SeededRng, jobs: int) -> AttackReport:
    attack = config.attack
    targets = select_targets(system, system.split.test, rng.derive("targets"), attack.highest_targets,
                             attack.lowest_targets, attack.random_targets)
    test_nodes = system.split.test if attack.evaluate_test_nodes else None
    if attack.method == "fraudster":
        return run_attack(system, attack.malicious, targets, attack.epsilon, attack.budget, rng.derive("attack"),
                          attack, test_nodes, jobs)
    return run_baseline(system, attack.method, attack.malicious, targets, attack.budget, rng.derive("attack"),
                        attack, test_nodes, jobs)


def adversarial_rows(system: GvflSystem, report: AttackReport) -> dict[int, torch.Tensor]:
    evaluator = PerturbationEvaluator(system, report.malicious)
    rows = {}
    for outcome in report.targets:
        adjacency = evaluator.clean_adjacency
        for u, v in outcome.flips:
            adjacency = adjacency.toggled(u, v)
        with torch.no_grad():
            rows[outcome.node] = evaluator.adversarial_row(outcome.node, adjacency)[0]
    return rows


def run_seed(
    graph: Graph,
    config: ExperimentConfig,
    seed: int,
    out_dir: Path,
    jobs: int = 1,
    checkpoint: Path | None = None,
) -> RunRecord:
    logger.info(f"[{config.name}] seed {seed}: {method_label(config)}")
    rng = SeededRng(seed)
    system = prepare_system(graph, config, seed, checkpoint)
    metrics = {
        "accuracy_train": accuracy(system, system.split.train),
        "accuracy_test": accuracy(system, system.split.test),
    }
    shares = contribution(system)
    for i, share in enumerate(shares):
        metrics[f"contribution_{i}"] = share
    if config.centralized:
        metrics["centralized_accuracy"] = centralized_accuracy(graph, system, config, rng.derive("centralized"))

    report = None
    if config.attack.method != "none":
        report = attack_system(system, config, rng, jobs)
        metrics["attacked_accuracy_targets"] = report.accuracy_targets
        if report.accuracy_test is not None:
            metrics["attacked_accuracy_test"] = report.accuracy_test
        for name in ("shadow_agreement", "surrogate_agreement"):
            if getattr(report, name) is not None:
                metrics[name] = getattr(report, name)
        write_margins_csv(report, out_dir / f"margins-seed-{seed}.csv")

    if config.save_checkpoints and checkpoint is None:
        save_system(system, out_dir / "checkpoints" / f"seed-{seed}")
    if config.export_embeddings:
        export_embeddings(system, out_dir / f"embeddings-seed-{seed}.csv",
                          adversarial_rows(system, report) if report else None)

    record = RunRecord(
        dataset=config.dataset.name,
        model=config.model.kind,
        method=method_label(config),
        seed=seed,
        metrics=metrics,
        config=config.model_dump(mode="json"),
        train_loss=system.loss_history,
        contribution=shares,
        attack=report,
    )
    write_json(record, out_dir / f"seed-{seed}.json")
    return record


def run_scenario(
    config: ExperimentConfig,
    jobs: int = 1,
    out_dir: Path | None = None,
    checkpoint: Path | None = None,
) -> ScenarioResult:
    """Every seed of one scenario, then ``aggregate.csv``. Output is independent of ``jobs``."""
    out_dir = Path(out_dir or config.out_dir)
    graph = load_dataset(config.dataset)
    if jobs <= 1 or len(config.seeds) == 1:
        records = [run_seed(graph, config, seed, out_dir, jobs, checkpoint) for seed in config.seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda s: run_seed(graph, config, s, out_dir, 1, checkpoint), config.seeds))
    table = aggregate(records)
    write_table_csv(table, out_dir / AGGREGATE_FILE)
    for row in table:
        logger.info(f"{row.dataset}/{row.model}/{row.method} {row.metric}: {row.cell}")
    return ScenarioResult(records, table, out_dir)


def axis_value(axis: str, value: float) -> float | int:
    if axis not in SWEEP_FIELDS:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {sorted(SWEEP_FIELDS)}")
    if axis in INTEGER_AXES:
        if value != int(value):
            raise ConfigError(f"sweep axis {axis} takes integers, got {value}")
        return int(value)
    return value


def sweep(
    config: ExperimentConfig,
    axis: SweepAxis,
    values: Sequence[float],
    jobs: int = 1,
    out_dir: Path | None = None,
) -> list[tuple[float | int, list[AggregateRow]]]:
    """Repeat the scenario for each axis value; writes ``sweep-<axis>.csv`` next to the per-value runs."""
    out_dir = Path(out_dir or config.out_dir)
    if axis == "K" and config.partition.mode != "features":
        raise ConfigError("sweeping K requires partition.mode = 'features'")
    if axis in ("k", "beta") and config.defense.kind != ("topk" if axis == "k" else "dp"):
        raise ConfigError(f"sweeping {axis} requires the matching defense kind")
    # Validate every point before any run writes output.
    points = [(v, with_updates(config, {SWEEP_FIELDS[axis]: v}))
              for v in (axis_value(axis, x) for x in values)]

    results = [(value, run_scenario(point, jobs, out_dir / f"{axis}={value}").table) for value, point in points]
    write_sweep_csv(out_dir / f"sweep-{axis}.csv", axis, results)
    return results


def load_records(directory: Path) -> list[RunRecord]:
    # Only this run's records; nested runs (restores, sweep points) have their own tables.
    paths = sorted(Path(directory).glob("seed-*.json"))
    if not paths:
        raise GvflError(f"no run records under {directory}")
    return [RunRecord.model_validate_json(p.read_text(encoding="utf-8")) for p in paths]


def report(directory: Path, out: Path | None = None) -> list[AggregateRow]:
    """Re-aggregate the run records directly inside ``directory``."""
    table = aggregate(load_records(directory))
    write_table_csv(table, Path(out or Path(directory) / AGGREGATE_FILE))
    return table
