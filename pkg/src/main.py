"""Main entry point for the GP experiment harness"""
import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import Settings
from .errors import EXIT_OK, GPError, exit_code_for
from .services.experiment_service import compare, eval_trees, run_experiment
from .utils.logger import setup_logger

logger = setup_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gp",
        description="Genetic programming engine and benchmark harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    run_cmd = commands.add_parser("run", help="Run the seeded repetitions of an experiment config")
    run_cmd.add_argument("config", help="JSON experiment config")
    run_cmd.add_argument("--out", help="Output directory (default: $GP_OUTPUT_DIR/<config name>)")
    run_cmd.add_argument("--seed", type=int, help="Master seed, overrides the config")
    run_cmd.add_argument("--jobs", type=int, help="Worker processes (default: config n_jobs, $GP_JOBS, CPU count)")
    run_cmd.add_argument("--reps", type=int, help="Repetitions, overrides the config")
    run_cmd.add_argument("--parallel-reps", action="store_true", help="Run repetitions concurrently")

    compare_cmd = commands.add_parser("compare", help="Paired comparison of two summary.csv files")
    compare_cmd.add_argument("summary_a")
    compare_cmd.add_argument("summary_b")
    compare_cmd.add_argument("--out", help="Also write the per-repetition pairs to this CSV")

    eval_cmd = commands.add_parser("eval", help="Score the trees of a tree file on a CSV dataset")
    eval_cmd.add_argument("tree_file")
    eval_cmd.add_argument("csv")
    eval_cmd.add_argument("--learner", default="RegressorLS",
                          help="RegressorLS, BinaryClassifier or Denoiser (default: RegressorLS)")
    eval_cmd.add_argument("--label", default="label", help="Target column name (default: label)")
    eval_cmd.add_argument("--no-standardize", action="store_true", help="Use features as stored")
    return parser


def _compare(args) -> int:
    report = compare(args.summary_a, args.summary_b)
    for line in report.lines():
        print(line)
    if args.out:
        report.pairs.to_csv(Path(args.out), index=False)
        logger.info(f"Wrote comparison pairs to {args.out}")
    return EXIT_OK


def _eval(args) -> int:
    scores = eval_trees(args.tree_file, args.csv, individual_class=args.learner,
                        label_column=args.label, standardize=not args.no_standardize)
    for i, (tree, fitness, metric) in enumerate(scores):
        print(f"{i}\tfitness={fitness!r}\tmetric={metric!r}\t{tree}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch the subcommand and return its exit status"""
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_experiment(args.config, args.out, seed=args.seed, jobs=args.jobs,
                                  reps=args.reps, parallel_reps=args.parallel_reps, settings=Settings())
        if args.command == "compare":
            return _compare(args)
        return _eval(args)
    except GPError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
