"""Deterministic parallel fitness evaluation and seeded random streams

Workers only ever compute pure fitness values; every random decision is
made by the coordinator on its own streams, so results do not depend on the
worker count.
"""
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from ..errors import EvaluationError
from ..gp.learners import Learner
from ..gp.tree import Tree
from ..storage.models import Batch
from ..utils.logger import setup_logger

logger = setup_logger(__name__)

# Below this many jobs per worker, process start-up costs more than it saves
MIN_JOBS_PER_WORKER = 8


@dataclass(frozen=True)
class EvalJob:
    index: int
    tree: Tree
    batch_id: int


def rng_stream(master_seed: int, stream_id: int) -> np.random.Generator:
    """Independent, reproducible sub-stream ``stream_id`` of ``master_seed``

    Counter-based Philox keyed through SeedSequence spawn keys: equal
    ``(master_seed, stream_id)`` pairs always yield the same stream.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(seq))


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a child master seed from a stream"""
    return int(rng.integers(0, 2**63 - 1))


def resolve_workers(n_workers: Optional[int]) -> int:
    if n_workers is None or n_workers < 1:
        return max(1, os.cpu_count() or 1)
    return n_workers


def partition(n_items: int, n_workers: int) -> List[Tuple[int, int]]:
    """Split ``range(n_items)`` into at most ``n_workers`` contiguous, near-equal ranges"""
    n_workers = max(1, min(n_workers, n_items))
    sizes = np.full(n_workers, n_items // n_workers, dtype=int)
    sizes[:n_items % n_workers] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(n_workers)]


def _evaluate_chunk(trees: Sequence[Tree], learner: Learner, batch: Batch) -> List[float]:
    return [learner.fitness(t, batch) for t in trees]


def evaluate_all(jobs: Sequence[EvalJob], learner: Learner, batch: Batch,
                 n_workers: int = 1) -> Dict[int, float]:
    """Fitness of every job on ``batch``, keyed by individual index

    Raises:
        EvaluationError: if any worker fails; no partial results are returned
    """
    if not jobs:
        return {}
    for job in jobs:
        if job.batch_id != batch.batch_id:
            raise EvaluationError(
                f"Job for individual {job.index} targets batch {job.batch_id}, "
                f"but batch {batch.batch_id} was supplied"
            )
    trees = [job.tree for job in jobs]
    workers = min(resolve_workers(n_workers), max(1, len(jobs) // MIN_JOBS_PER_WORKER))
    try:
        if workers == 1:
            values = _evaluate_chunk(trees, learner, batch)
        else:
            chunks = partition(len(trees), workers)
            results = Parallel(n_jobs=workers)(
                delayed(_evaluate_chunk)(trees[lo:hi], learner, batch) for lo, hi in chunks
            )
            values = [v for chunk in results for v in chunk]
    except Exception as e:
        logger.error(f"Fitness evaluation failed on batch {batch.batch_id}: {e}", exc_info=True)
        raise EvaluationError(f"Fitness evaluation failed: {e}") from e
    if len(values) != len(jobs):
        raise EvaluationError(f"Expected {len(jobs)} fitness values, got {len(values)}")
    return {job.index: value for job, value in zip(jobs, values)}


def run_parallel(fn: Callable, arguments: Sequence[tuple], n_workers: int) -> list:
    """Apply ``fn`` to each argument tuple, in order, on up to ``n_workers`` processes"""
    workers = min(resolve_workers(n_workers), len(arguments))
    try:
        if workers <= 1:
            return [fn(*args) for args in arguments]
        return Parallel(n_jobs=workers)(delayed(fn)(*args) for args in arguments)
    except EvaluationError:
        raise
    except Exception as e:
        logger.error(f"Parallel task {getattr(fn, '__name__', fn)} failed: {e}", exc_info=True)
        raise EvaluationError(f"Parallel task failed: {e}") from e
