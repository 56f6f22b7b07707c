"""Data models for batches, individuals and run logs"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..gp.tree import Tree


@dataclass(frozen=True)
class Batch:
    """A block of samples fitness is computed on; ``batch_id`` keys the fitness cache"""
    X: np.ndarray
    y: np.ndarray
    batch_id: int = 0

    def __len__(self) -> int:
        return len(self.y)


@dataclass
class Individual:
    """One tree plus its cached fitness and the batch that fitness refers to"""
    tree: Tree
    fitness: Optional[float] = None
    fitness_batch_id: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.tree.nodes)

    def is_current(self, batch_id: int) -> bool:
        return self.fitness is not None and self.fitness_batch_id == batch_id

    def scored(self, fitness: float, batch_id: int) -> "Individual":
        self.fitness = fitness
        self.fitness_batch_id = batch_id
        return self

    def copy(self) -> "Individual":
        return Individual(self.tree, self.fitness, self.fitness_batch_id)


RUNLOG_HEADER = ("generation", "best_train", "best_test", "mean_fitness", "evaluations", "elapsed_s")


@dataclass(frozen=True)
class RunLogRow:
    generation: int
    best_train: float
    best_test: float
    mean_fitness: float
    evaluations: int
    elapsed_s: float

    def as_record(self) -> tuple:
        return (self.generation, self.best_train, self.best_test,
                self.mean_fitness, self.evaluations, self.elapsed_s)


@dataclass
class RunLog:
    rows: list = field(default_factory=list)
    best: Optional[Individual] = None
    test_metric: str = "mse"
    # sample evaluations outside the per-row offspring count
    rescored: int = 0

    def append(self, row: RunLogRow) -> None:
        self.rows.append(row)

    @property
    def final(self) -> RunLogRow:
        return self.rows[-1]
