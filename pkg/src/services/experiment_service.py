"""Experiment harness: seeded repetitions, summaries, comparisons and tree scoring"""
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.stats import binomtest

from ..config import ExperimentConfig, Settings
from ..errors import EXIT_OK, GPError, UsageError, exit_code_for
from ..gp.learners import Learner, learner_for
from ..gp.primitives import PrimitiveSet
from ..gp.tree import Tree, TreeSpace, depth
from ..storage.datasets import Dataset, load_csv
from ..storage.models import RunLog
from ..storage.runlog import (
    SummaryRow,
    aggregate,
    prepare_output_dir,
    read_summary,
    write_aggregate,
    write_runlog,
    write_summary,
)
from ..utils.logger import setup_logger
from ..utils.tree_loader import load_tree_file, write_tree_file
from .evaluation_scheduler import derive_seed, resolve_workers, rng_stream, run_parallel
from .population_engine import run

logger = setup_logger(__name__)

# Depth allowance for trees read back from files; the file, not a config, bounds them
EVAL_MAX_DEPTH = 64


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    out_dir: Path
    rows: List[SummaryRow] = field(default_factory=list)
    elapsed_s: float = 0.0

    def summary_line(self) -> str:
        tests = [r.final_best_test for r in self.rows]
        trains = [r.final_best_train for r in self.rows]
        metric = self.rows[0].metric if self.rows else ""
        return (
            f"{self.config.name}: {len(self.rows)} repetition(s), "
            f"median final best train {np.median(trains):.6g}, "
            f"median final test {metric} {np.median(tests):.6g}, "
            f"total {self.elapsed_s:.2f}s -> {self.out_dir}"
        )


def repetition_seed(master_seed: int, rep: int) -> int:
    """Seed of repetition ``rep``: drawn from stream ``rep`` of the master seed"""
    return derive_seed(rng_stream(master_seed, rep))


def run_repetition(config: ExperimentConfig, dataset: Dataset, rep: int,
                   n_workers: int = 1) -> Tuple[SummaryRow, RunLog]:
    seed = repetition_seed(config.seed, rep)
    logger.info(f"[{config.name}] repetition {rep} (seed {seed})")
    log = run(config, config.learner(), dataset, seed=seed, n_workers=n_workers)
    return SummaryRow.from_runlog(rep, rep, log), log


def execute_experiment(config: ExperimentConfig, out_dir, n_workers: int = 1,
                       parallel_reps: bool = False) -> ExperimentResult:
    """Run every repetition of ``config`` and write its outputs to ``out_dir``

    Writes ``run_<i>.csv``, ``best_<i>.txt``, ``summary.csv`` and
    ``aggregate.csv``. Outputs do not depend on ``n_workers`` or
    ``parallel_reps`` apart from wall-clock columns.
    """
    out = prepare_output_dir(out_dir)
    dataset = config.build_dataset()
    started = time.perf_counter()
    result = ExperimentResult(config, out)

    if parallel_reps and config.repetitions > 1:
        # one worker per repetition, evaluation inside each stays sequential
        outcomes = run_parallel(run_repetition,
                                [(config, dataset, rep, 1) for rep in range(config.repetitions)],
                                n_workers)
    else:
        outcomes = (run_repetition(config, dataset, rep, n_workers) for rep in range(config.repetitions))

    for row, log in outcomes:
        write_runlog(log, out / f"run_{row.rep}.csv")
        write_tree_file(out / f"best_{row.rep}.txt", [log.best.tree],
                        header=f"{config.name} repetition {row.rep}\n"
                               f"train fitness {log.best.fitness!r}")
        result.rows.append(row)

    write_summary(result.rows, out / "summary.csv")
    write_aggregate([aggregate(result.rows, config.name)], out / "aggregate.csv")
    result.elapsed_s = time.perf_counter() - started
    return result


def run_experiment(config_path, out_dir=None, seed: Optional[int] = None, jobs: Optional[int] = None,
                   reps: Optional[int] = None, parallel_reps: bool = False,
                   settings: Optional[Settings] = None) -> int:
    """Load a config, run it and return the CLI exit status

    Args:
        config_path: JSON experiment config
        out_dir: Output directory (default: ``GP_OUTPUT_DIR``/<config name>)
        seed: Overrides the config's master seed
        jobs: Worker count; falls back to config ``n_jobs``, then ``GP_JOBS``,
            then the number of CPUs
        reps: Overrides the config's repetition count
        parallel_reps: Run repetitions concurrently

    Returns:
        0 on success, 1 on configuration errors, 2 on runtime errors
    """
    try:
        settings = settings or Settings()
        config = ExperimentConfig.from_file(config_path).with_overrides(seed=seed, repetitions=reps)
        if out_dir is None:
            out_dir = Path(settings.output_dir) / config.name
        n_workers = resolve_workers(jobs or config.n_jobs or settings.jobs)
        logger.info(f"Running '{config.name}': {config.repetitions} repetition(s), {n_workers} worker(s)")
        result = execute_experiment(config, out_dir, n_workers, parallel_reps)
    except GPError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Experiment failed: {e}", exc_info=True)
        return exit_code_for(e)

    print(result.summary_line())
    return EXIT_OK


@dataclass
class ComparisonReport:
    """Paired per-repetition comparison of two setups"""
    label_a: str
    label_b: str
    metric: str
    pairs: pd.DataFrame
    wins_a: int
    wins_b: int
    ties: int
    p_value: float

    @property
    def repetitions(self) -> int:
        return len(self.pairs)

    @property
    def median_test_delta(self) -> float:
        return float(self.pairs["test_delta"].median())

    @property
    def median_runtime_ratio(self) -> float:
        return float(self.pairs["runtime_ratio"].median())

    @property
    def median_runtime_delta(self) -> float:
        return float(self.pairs["runtime_delta"].median())

    def lines(self) -> List[str]:
        return [
            f"A: {self.label_a}",
            f"B: {self.label_b}",
            f"repetitions: {self.repetitions}",
            f"metric: {self.metric}",
            f"median test {self.metric} A: {self.pairs['test_a'].median():.6g}, "
            f"B: {self.pairs['test_b'].median():.6g}",
            f"median test delta (A-B): {self.median_test_delta:.6g}",
            f"median runtime delta (A-B): {self.median_runtime_delta:.6g}s",
            f"median runtime ratio (A/B): {self.median_runtime_ratio:.6g}",
            f"wins A: {self.wins_a}, wins B: {self.wins_b}, ties: {self.ties}",
            f"sign test p-value: {self.p_value:.6g}",
        ]


def compare(summary_a, summary_b) -> ComparisonReport:
    """Pair two summaries by repetition and compare final test metric and runtime

    Raises:
        UsageError: on mismatched repetition counts or metrics
    """
    a, b = read_summary(summary_a), read_summary(summary_b)
    if len(a) != len(b):
        raise UsageError(
            f"Repetition counts differ: {summary_a} has {len(a)}, {summary_b} has {len(b)}"
        )
    if len(a) == 0:
        raise UsageError("Nothing to compare: the summaries have no repetitions")
    metrics = set(a["metric"]) | set(b["metric"])
    if len(metrics) != 1:
        raise UsageError(f"Summaries report different metrics: {', '.join(sorted(map(str, metrics)))}")
    metric = metrics.pop()
    if not (a["rep"].to_numpy() == b["rep"].to_numpy()).all():
        raise UsageError("Summaries cover different repetition indices; pairing needs the same seeds")

    test_a = a["final_best_test"].to_numpy(dtype=float)
    test_b = b["final_best_test"].to_numpy(dtype=float)
    elapsed_a = a["elapsed_s"].to_numpy(dtype=float)
    elapsed_b = b["elapsed_s"].to_numpy(dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(elapsed_b > 0, elapsed_a / elapsed_b, math.nan)
    pairs = pd.DataFrame({
        "rep": a["rep"].to_numpy(),
        "test_a": test_a,
        "test_b": test_b,
        "test_delta": test_a - test_b,
        "elapsed_a": elapsed_a,
        "elapsed_b": elapsed_b,
        "runtime_delta": elapsed_a - elapsed_b,
        "runtime_ratio": ratio,
    })

    # accuracy is maximized, every other metric minimized
    better_a = test_a > test_b if metric == "accuracy" else test_a < test_b
    better_b = test_b > test_a if metric == "accuracy" else test_b < test_a
    wins_a, wins_b = int(better_a.sum()), int(better_b.sum())
    ties = len(pairs) - wins_a - wins_b
    decided = wins_a + wins_b
    p_value = binomtest(wins_a, decided, 0.5).pvalue if decided else 1.0
    return ComparisonReport(str(summary_a), str(summary_b), metric, pairs, wins_a, wins_b, ties, float(p_value))


def eval_trees(tree_file, csv_path, individual_class: str = "RegressorLS", label_column: str = "label",
               standardize: bool = True) -> List[Tuple[Tree, float, float]]:
    """Score every tree of a tree file on every row of a CSV dataset

    Returns:
        (tree, fitness, test metric) per tree, fitness being the learner's
        minimized objective over the whole file
    """
    learner: Learner = learner_for(individual_class)
    dataset = load_csv(csv_path, label_column, task=learner.task, standardize=standardize)
    space = TreeSpace(PrimitiveSet.default(with_mezzanine=True), dataset.input_size, EVAL_MAX_DEPTH)
    trees = load_tree_file(tree_file, space)
    batch = dataset.train_batch()
    scores = []
    for tree in trees:
        scores.append((tree, learner.fitness(tree, batch), learner.test_metric(tree, batch.X, batch.y)))
        logger.debug(f"Scored tree of depth {depth(tree)}: {scores[-1][1]:.6g}")
    return scores
