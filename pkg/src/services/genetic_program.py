"""Scikit-learn estimators over the population engine"""
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Type, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..config import ExperimentConfig
from ..errors import ConfigError, UsageError
from ..gp.learners import Learner
from ..gp.primitives import DEFAULT_LOWLEVEL, PrimitiveSet
from ..gp.tree import Tree
from ..storage.datasets import Dataset, TaskKind
from ..utils.logger import setup_logger
from .evaluation_scheduler import resolve_workers
from .population_engine import run

logger = setup_logger(__name__)

DEFAULT_OPERATIONS = ("subtree_mutation", "protected_crossover", "numeric_mutation")
DEFAULT_COMPLEXITY = 6


def _operation_name(op: Union[str, Callable]) -> str:
    return op if isinstance(op, str) else getattr(op, "__name__", str(op))


class GeneticProgram(BaseEstimator):
    """Evolve one model with ``fit`` and use it with ``predict``/``score``

    Primitives are declared once for the class with ``set_primitives`` and
    read when ``fit`` runs. The constructor arguments mirror the experiment
    config keys and are stored unchanged, so ``get_params``/``set_params``,
    ``clone`` and grid searches work as for any scikit-learn estimator.
    """

    lowlevel: Tuple[str, ...] = DEFAULT_LOWLEVEL
    mezzanine: Tuple[str, ...] = ()
    _default_learner = "RegressorLS"

    @classmethod
    def set_primitives(cls, lowlevel: Sequence[str], mezzanine: Optional[Sequence[str]] = None) -> None:
        """Declare the primitive set used by every later ``fit``

        Raises:
            ConfigError: on an unknown primitive id
        """
        PrimitiveSet.from_ids(lowlevel, mezzanine)
        # assign on the base so the regressor and classifier see it too
        GeneticProgram.lowlevel = tuple(lowlevel)
        GeneticProgram.mezzanine = tuple(mezzanine or ())
        logger.debug(f"Primitives set: {GeneticProgram.lowlevel} / {GeneticProgram.mezzanine}")

    def __init__(self, individual_class: Union[str, Type[Learner], None] = None,
                 operations: Sequence = DEFAULT_OPERATIONS,
                 operations_prob: Sequence[float] = (0.4, 0.4, 0.2),
                 ind_params: Optional[Dict[str, Any]] = None,
                 pop_size: int = 500, generations: int = 20,
                 operations_arity: Optional[Sequence[int]] = None,
                 pop_dynamics: str = "Steady_State", online: bool = False,
                 minimization: bool = True, n_jobs: Optional[int] = None,
                 batch_size: Optional[int] = None, seed: int = 0,
                 tournament_size: int = 3, numeric_sigma: float = 0.1,
                 crossover_function_bias: Optional[float] = None, elitism: bool = True,
                 cellular: Optional[Dict[str, Any]] = None, islands: Optional[Dict[str, Any]] = None):
        """
        Initialize the estimator

        Args:
            individual_class: Learner class or its name (RegressorLS, BinaryClassifier, Denoiser)
            operations: Operator names or handles such as ``RegressorLS.protected_crossover``
            operations_prob: Probability of each operation
            ind_params: ``input_vector_size``, ``complexity`` and optionally
                ``window_length`` and ``const_range``. The input size defaults
                to the column count of ``X`` and the complexity to 6.
            pop_size: Population size
            generations: Generations to run
            operations_arity: Parents required by each operation
            pop_dynamics: Steady_State, Cellular or Island
            online: Mini-batch mode
            minimization: Must be true; every learner minimizes
            n_jobs: Worker processes
            batch_size: Mini-batch size in online mode
            seed: Master seed
            tournament_size: Steady-state tournament size
            numeric_sigma: Standard deviation of numeric mutation
            crossover_function_bias: Chance that crossover picks function nodes
            elitism: Keep the best individual through cellular and island replacement
            cellular: Grid section, as in the experiment config
            islands: Island section, as in the experiment config
        """
        self.individual_class = individual_class
        self.operations = operations
        self.operations_prob = operations_prob
        self.ind_params = ind_params
        self.pop_size = pop_size
        self.generations = generations
        self.operations_arity = operations_arity
        self.pop_dynamics = pop_dynamics
        self.online = online
        self.minimization = minimization
        self.n_jobs = n_jobs
        self.batch_size = batch_size
        self.seed = seed
        self.tournament_size = tournament_size
        self.numeric_sigma = numeric_sigma
        self.crossover_function_bias = crossover_function_bias
        self.elitism = elitism
        self.cellular = cellular
        self.islands = islands

    def build_config(self, n_features: int) -> ExperimentConfig:
        """Turn the current parameters into a validated run config

        Raises:
            ConfigError: on any invalid parameter
        """
        learner = self.individual_class or self._default_learner
        ind_params = dict(self.ind_params or {})
        ind_params.setdefault("input_vector_size", n_features)
        ind_params.setdefault("complexity", DEFAULT_COMPLEXITY)
        data = {
            "name": type(self).__name__,
            "individual_class": learner if isinstance(learner, str) else learner.name,
            "lowlevel": list(self.lowlevel),
            "mezzanine": list(self.mezzanine),
            "ind_params": ind_params,
            "operations": [_operation_name(op) for op in self.operations],
            "operations_prob": list(self.operations_prob),
            "operations_arity": None if self.operations_arity is None else list(self.operations_arity),
            "pop_size": self.pop_size,
            "generations": self.generations,
            "pop_dynamics": self.pop_dynamics,
            "online": self.online,
            "minimization": self.minimization,
            "n_jobs": self.n_jobs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "tournament_size": self.tournament_size,
            "numeric_sigma": self.numeric_sigma,
            "crossover_function_bias": self.crossover_function_bias,
            "elitism": self.elitism,
            "cellular": self.cellular,
            "islands": self.islands,
        }
        # the data comes from fit()
        return ExperimentConfig.from_dict(data, require_dataset=False)

    def fit(self, X, y, X_test=None, y_test=None) -> "GeneticProgram":
        """Evolve on ``(X, y)``; the optional test split feeds the logged test metric

        Raises:
            ConfigError: on invalid parameters
            UsageError: when the data does not fit the parameters
        """
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if X_test is None:
            X_test, y_test = np.empty((0, X.shape[1])), np.empty(0)
        else:
            X_test, y_test = check_X_y(X_test, y_test, dtype=float, y_numeric=True)
        if X.shape[1] != X_test.shape[1]:
            raise UsageError(f"X has {X.shape[1]} features but X_test has {X_test.shape[1]}")

        config = self.build_config(X.shape[1])
        learner = config.learner()
        self._check_task(learner)
        if learner.task is TaskKind.CLASSIFICATION:
            self.classes_ = np.unique(y)
            if not set(self.classes_) <= {0.0, 1.0}:
                raise UsageError(f"{learner.name} expects labels in {{0, 1}}, got {self.classes_.tolist()}")

        n = len(y)
        dataset = Dataset(np.vstack([X, X_test]), np.concatenate([y, y_test]), learner.task,
                          np.arange(n), np.arange(n, n + len(y_test)))
        try:
            config.check_dataset(dataset)
        except ConfigError as e:
            raise UsageError(str(e)) from e
        self.config_ = config
        self.learner_ = learner
        self.n_features_in_ = X.shape[1]
        self.run_log_ = run(config, learner, dataset, n_workers=resolve_workers(config.n_jobs))
        self.best_ = self.run_log_.best
        logger.info(f"Fitted {learner.name}: best train fitness {self.best_.fitness:.6g}")
        return self

    def _check_task(self, learner: Learner) -> None:
        """Subclasses reject learners of the wrong task kind"""

    @property
    def model_(self) -> Tree:
        check_is_fitted(self, "best_")
        return self.best_.tree

    def _inputs(self, X) -> np.ndarray:
        check_is_fitted(self, "best_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise UsageError(f"X has {X.shape[1]} features, the model was fitted on {self.n_features_in_}")
        return X

    def predict(self, X) -> np.ndarray:
        """Real outputs for regression/denoising, {0, 1} labels for classification"""
        return self.learner_.predict(self.model_, self._inputs(X))

    def score(self, X, y) -> float:
        """The learner's test metric: MSE, or accuracy for classification"""
        X = self._inputs(X)
        return self.learner_.test_metric(self.model_, X, np.asarray(y, dtype=float))


class GPRegressor(RegressorMixin, GeneticProgram):
    """Regression estimator; ``score`` is the coefficient of determination"""

    def _check_task(self, learner: Learner) -> None:
        if learner.task is TaskKind.CLASSIFICATION:
            raise ConfigError(f"GPRegressor cannot fit {learner.name}")


class GPClassifier(ClassifierMixin, GeneticProgram):
    """Binary classifier over {0, 1} labels; ``score`` is accuracy"""

    _default_learner = "BinaryClassifier"

    def _check_task(self, learner: Learner) -> None:
        if learner.task is not TaskKind.CLASSIFICATION:
            raise ConfigError(f"GPClassifier cannot fit {learner.name}")
