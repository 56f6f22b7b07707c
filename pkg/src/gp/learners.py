"""GP individual classes: least-squares regressor, binary classifier, denoiser

Each learner binds a tree to a fitness function (always minimized) and a
test metric used for reporting.
"""
import math
from typing import Dict, Type

import numpy as np

from ..errors import ConfigError, UsageError
from ..storage.datasets import TaskKind
from ..storage.models import Batch
from .genetic_ops import numeric_mutation, point_mutation_i2, protected_crossover, subtree_mutation
from .tree import Tree, compile

# Squared errors are capped so exactly rounded sums can never overflow
_SQUARED_ERROR_CAP = 1e300


def _require_samples(batch: Batch) -> None:
    if len(batch) == 0:
        raise UsageError("Fitness requires a non-empty batch")


def mean_squared_error(predictions: np.ndarray, targets: np.ndarray) -> float:
    """MSE with exactly rounded summation (bitwise independent of sample order)"""
    with np.errstate(all="ignore"):
        errors = np.minimum((predictions - targets) ** 2, _SQUARED_ERROR_CAP)
    return math.fsum(errors) / len(targets)


def classify(outputs: np.ndarray) -> np.ndarray:
    """Sign rule: class 1 when the raw output is positive"""
    return (outputs > 0.0).astype(int)


def error_rate(outputs: np.ndarray, labels: np.ndarray) -> float:
    return int(np.count_nonzero(classify(outputs) != labels.astype(int))) / len(labels)


def fitness_regression(t: Tree, batch: Batch) -> float:
    _require_samples(batch)
    return mean_squared_error(compile(t).evaluate(batch.X), batch.y)


def fitness_classification(t: Tree, batch: Batch) -> float:
    _require_samples(batch)
    return error_rate(compile(t).evaluate(batch.X), batch.y)


def fitness_denoise(t: Tree, batch: Batch) -> float:
    """MSE between the tree's output on each noisy patch and the clean center pixel"""
    _require_samples(batch)
    return mean_squared_error(compile(t).evaluate(batch.X), batch.y)


class Learner:
    """Base learner; subclasses pick the fitness function and reported metric"""
    name = "Learner"
    minimization = True
    test_metric_name = "mse"
    task = TaskKind.REGRESSION

    # variation operators, addressable as e.g. RegressorLS.protected_crossover
    mutation = staticmethod(subtree_mutation)
    protected_crossover = staticmethod(protected_crossover)
    numeric_mutation = staticmethod(numeric_mutation)
    mutation_i2 = staticmethod(point_mutation_i2)

    def fitness(self, t: Tree, batch: Batch) -> float:
        raise NotImplementedError

    def test_metric(self, t: Tree, X: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            return float("nan")
        return self.fitness(t, Batch(X, y))

    def predict(self, t: Tree, X: np.ndarray) -> np.ndarray:
        return compile(t).evaluate(X)

    def __repr__(self) -> str:
        return f"{self.name}()"


class RegressorLS(Learner):
    name = "RegressorLS"

    def fitness(self, t: Tree, batch: Batch) -> float:
        return fitness_regression(t, batch)


class BinaryClassifier(Learner):
    """Minimizes error rate; reports test accuracy"""
    name = "BinaryClassifier"
    test_metric_name = "accuracy"
    task = TaskKind.CLASSIFICATION

    def fitness(self, t: Tree, batch: Batch) -> float:
        return fitness_classification(t, batch)

    def test_metric(self, t: Tree, X: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            return float("nan")
        return 1.0 - fitness_classification(t, Batch(X, y))

    def predict(self, t: Tree, X: np.ndarray) -> np.ndarray:
        return classify(compile(t).evaluate(X))


class Denoiser(Learner):
    name = "Denoiser"
    task = TaskKind.DENOISING

    def fitness(self, t: Tree, batch: Batch) -> float:
        return fitness_denoise(t, batch)


LEARNERS: Dict[str, Type[Learner]] = {
    cls.name: cls for cls in (RegressorLS, BinaryClassifier, Denoiser)
}


def learner_for(individual_class: str) -> Learner:
    try:
        return LEARNERS[individual_class]()
    except KeyError:
        raise ConfigError(
            f"Unknown individual_class '{individual_class}'. Known: {', '.join(LEARNERS)}"
        ) from None
