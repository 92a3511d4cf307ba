import argparse
import logging
import sys
from pathlib import Path

from src.config import settings
from src.errors import ConfigError, GvflError

logging.basicConfig(
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    level=settings.log_level,
)
logger = logging.getLogger(__name__)


def _seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _values(text: str) -> list[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gvfl", description="GNN-based vertical federated learning simulator")
    verbs = parser.add_subparsers(dest="verb", required=True)

    convert = verbs.add_parser("convert", help="convert a .content/.cites citation dataset")
    convert.add_argument("--content", type=Path, required=True)
    convert.add_argument("--cites", type=Path, required=True)
    convert.add_argument("--out", type=Path, required=True)

    def scenario(name: str, help_text: str) -> argparse.ArgumentParser:
        p = verbs.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, required=True)
        p.add_argument("--seed-override", type=_seeds, default=None, help="comma-separated seeds")
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--jobs", type=int, default=settings.jobs)
        return p

    scenario("train", "train the federation and report clean accuracy")

    attack = scenario("attack", "train (or restore) and run an attack")
    attack.add_argument("--method", choices=["fraudster", "rnd", "fga"], default=None)
    attack.add_argument("--checkpoint", type=Path, default=None, help="directory written by save_checkpoints")

    defend = scenario("defend", "run an attack against a defended federation")
    defend.add_argument("--method", choices=["fraudster", "rnd", "fga"], default=None)
    defend.add_argument("--defense", choices=["none", "dp", "topk"], required=True)
    defend.add_argument("--beta", type=float, default=None)
    defend.add_argument("--k", type=int, default=None)

    sweep = scenario("sweep", "repeat a scenario over one parameter axis")
    sweep.add_argument("--axis", choices=["epsilon", "d", "k", "beta", "K"], required=True)
    sweep.add_argument("--values", type=_values, required=True, help="comma-separated values")

    report = verbs.add_parser("report", help="re-aggregate run records under a directory")
    report.add_argument("--out", type=Path, required=True)
    return parser


def run(args: argparse.Namespace) -> None:
    # Heavy imports after argument parsing keep --help fast.
    from src.experiment import load_config, report, run_scenario, sweep, with_updates
    from src.graph import convert_citation

    if args.verb == "convert":
        summary = convert_citation(args.content, args.cites, args.out)
        logger.info(f"Converted dataset: {summary}")
        return
    if args.verb == "report":
        for row in report(args.out):
            print(f"{row.dataset}\t{row.model}\t{row.method}\t{row.metric}\t{row.cell}")
        return

    updates: dict = {}
    if args.seed_override:
        updates["seeds"] = args.seed_override
    if args.out:
        updates["output_dir"] = str(args.out)
    if args.verb == "train":
        updates["attack.method"] = "none"
    if getattr(args, "method", None):
        updates["attack.method"] = args.method
    if args.verb == "defend":
        updates["defense.kind"] = args.defense
        if args.beta is not None:
            updates["defense.beta"] = args.beta
        if args.k is not None:
            updates["defense.k"] = args.k
    config = with_updates(load_config(args.config), updates)
    if args.verb == "attack" and config.attack.method == "none":
        raise ConfigError("attack needs --method or attack.method in the config")

    if args.verb == "sweep":
        for value, rows in sweep(config, args.axis, args.values, args.jobs):
            for row in rows:
                print(f"{args.axis}={value}\t{row.method}\t{row.metric}\t{row.cell}")
        return
    result = run_scenario(config, args.jobs, checkpoint=getattr(args, "checkpoint", None))
    for row in result.table:
        print(f"{row.dataset}\t{row.model}\t{row.method}\t{row.metric}\t{row.cell}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except GvflError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except Exception as e:
        logger.error(f"Unexpected error in {args.verb}: {e}", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
