"""Population dynamics: steady state, cellular torus and ring-connected islands"""
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, StaleFitnessError, UsageError
from ..gp.genetic_ops import OperatorSpec, VariationFn, bind_operators
from ..gp.learners import Learner
from ..gp.tree import TreeSpace, ramped_half_and_half
from ..storage.datasets import BatchIterator, Dataset
from ..storage.models import Batch, Individual, RunLog, RunLogRow
from ..utils.logger import setup_logger
from .evaluation_scheduler import EvalJob, evaluate_all, rng_stream, run_parallel

logger = setup_logger(__name__)

# Stream ids below this are reserved for the coordinator and batch shuffles
ISLAND_STREAM_OFFSET = 2


class Dynamics(str, Enum):
    STEADY_STATE = "Steady_State"
    CELLULAR = "Cellular"
    ISLAND = "Island"


class Neighborhood(str, Enum):
    VON_NEUMANN = "VonNeumann"
    MOORE = "Moore"


@dataclass(frozen=True)
class SteadyStateConfig:
    pop_size: int
    generations: int
    tournament_size: int = 3
    elitism: bool = True

    def __post_init__(self):
        if self.pop_size < 2:
            raise ConfigError(f"pop_size must be >= 2, got {self.pop_size}")
        if not 2 <= self.tournament_size <= self.pop_size:
            raise ConfigError(
                f"tournament_size must be in [2, pop_size={self.pop_size}], got {self.tournament_size}"
            )
        if self.generations < 0:
            raise ConfigError(f"generations must be >= 0, got {self.generations}")


@dataclass(frozen=True)
class CellularConfig:
    grid_w: int
    grid_h: int
    neighborhood: Neighborhood = Neighborhood.VON_NEUMANN
    radius: int = 1

    def __post_init__(self):
        if self.grid_w < 1 or self.grid_h < 1:
            raise ConfigError(f"Grid must be at least 1x1, got {self.grid_w}x{self.grid_h}")
        if self.radius < 1:
            raise ConfigError(f"cellular radius must be >= 1, got {self.radius}")

    @property
    def size(self) -> int:
        return self.grid_w * self.grid_h


@dataclass(frozen=True)
class IslandConfig:
    n_islands: int
    island_pop: int
    migration_interval: int = 10
    n_migrants: Optional[int] = None
    topology: str = "Ring"

    def __post_init__(self):
        if self.n_islands < 1:
            raise ConfigError(f"n_islands must be >= 1, got {self.n_islands}")
        if self.island_pop < 2:
            raise ConfigError(f"island_pop must be >= 2, got {self.island_pop}")
        if self.migration_interval < 1:
            raise ConfigError(f"migration_interval must be >= 1, got {self.migration_interval}")
        if self.topology != "Ring":
            raise ConfigError(f"Only the Ring island topology is supported, got '{self.topology}'")
        if self.n_migrants is None:
            object.__setattr__(self, "n_migrants", max(1, round(0.05 * self.island_pop)))
        if not 0 <= self.n_migrants < self.island_pop:
            raise ConfigError(
                f"n_migrants must be in [0, island_pop={self.island_pop}), got {self.n_migrants}"
            )


@dataclass
class Variation:
    """Bound operators with their selection probabilities"""
    operators: List[Tuple[VariationFn, int]]
    probabilities: np.ndarray

    @classmethod
    def from_specs(cls, specs: Sequence[OperatorSpec], numeric_sigma: float = 0.1,
                   function_bias: Optional[float] = None) -> "Variation":
        probs = np.array([s.probability for s in specs], dtype=float)
        return cls(bind_operators(specs, numeric_sigma, function_bias), probs / probs.sum())

    def offspring(self, rng: np.random.Generator, select) -> Tuple[Optional[object], Tuple[int, ...]]:
        """Draw an operator, select its parents with ``select()`` and apply it

        Returns the child tree (``None`` when it is identical to a parent, so it
        is not worth evaluating) and the parent indices.
        """
        fn, arity = self.operators[int(rng.choice(len(self.operators), p=self.probabilities))]
        parents = tuple(select() for _ in range(arity))
        trees = [p[1] for p in parents]
        child = fn(rng, *trees)
        indices = tuple(p[0] for p in parents)
        if any(child.nodes == t.nodes for t in trees):
            return None, indices
        return child, indices


class Population:
    """Individuals plus score/size arrays kept in sync for fast best/worst lookups

    Scores are fitness values oriented so that lower is always better.
    """

    def __init__(self, individuals: Sequence[Individual], minimization: bool = True):
        self.individuals = list(individuals)
        self.minimization = minimization
        self.refresh()

    def __len__(self) -> int:
        return len(self.individuals)

    def __getitem__(self, index: int) -> Individual:
        return self.individuals[index]

    def __iter__(self):
        return iter(self.individuals)

    def score_of(self, fitness: Optional[float]) -> float:
        if fitness is None:
            return math.inf
        return fitness if self.minimization else -fitness

    def refresh(self) -> None:
        self.scores = np.array([self.score_of(i.fitness) for i in self.individuals], dtype=float)
        self.sizes = np.array([i.size for i in self.individuals], dtype=int)

    def replace(self, index: int, individual: Individual) -> None:
        self.individuals[index] = individual
        self.scores[index] = self.score_of(individual.fitness)
        self.sizes[index] = individual.size

    def ranked(self) -> List[int]:
        """Indices best first: lower score, then smaller tree, then lower index"""
        return sorted(range(len(self)), key=lambda i: (self.scores[i], self.sizes[i], i))

    def best_index(self) -> int:
        candidates = np.flatnonzero(self.scores == self.scores.min())
        return int(min(candidates, key=lambda i: (self.sizes[i], i)))

    def worst_index(self) -> int:
        candidates = np.flatnonzero(self.scores == self.scores.max())
        return int(max(candidates, key=lambda i: (self.sizes[i], i)))


@dataclass
class RunState:
    generation: int
    populations: List[Population]
    rng: np.random.Generator
    island_rngs: List[np.random.Generator] = field(default_factory=list)
    batch_id: int = 0
    best_ever: Optional[Individual] = None
    # sample evaluations of new offspring
    evaluations: int = 0
    # sample evaluations spent scoring the initial population and re-scoring it on new batches
    rescored: int = 0
    # cell -> parent cells of the offspring produced there in the last sweep
    provenance: Dict[int, Tuple[int, ...]] = field(default_factory=dict)


def tournament_index(rng: np.random.Generator, pop: Population, k: int, batch_id: int,
                     pool: Optional[Sequence[int]] = None) -> int:
    """Best of ``k`` distinct individuals drawn from ``pool`` (default: whole population)"""
    if pool is None:
        pool = range(len(pop))
    if not pool:
        raise UsageError("Tournament over an empty population")
    k = min(k, len(pool))
    best_key, best = None, -1
    for pick in rng.choice(len(pool), size=k, replace=False):
        i = int(pool[int(pick)])
        if not pop[i].is_current(batch_id):
            raise StaleFitnessError(
                f"Individual {i} has fitness for batch {pop[i].fitness_batch_id}, expected {batch_id}"
            )
        key = (pop.scores[i], pop.sizes[i], i)
        if best_key is None or key < best_key:
            best_key, best = key, i
    return best


def tournament_select(rng: np.random.Generator, pop: Population, k: int, batch_id: int) -> Individual:
    return pop[tournament_index(rng, pop, k, batch_id)]


def _insertions(rng: np.random.Generator, pop: Population, n_insertions: int, config: SteadyStateConfig,
                learner: Learner, batch: Batch, variation: Variation) -> int:
    """Steady-state insertions on one population; returns sample evaluations spent"""
    evaluations = discarded = 0

    def select():
        i = tournament_index(rng, pop, config.tournament_size, batch.batch_id)
        return i, pop[i].tree

    for _ in range(n_insertions):
        child, _ = variation.offspring(rng, select)
        if child is None:
            discarded += 1
            continue
        fitness = learner.fitness(child, batch)
        evaluations += len(batch)
        worst = pop.worst_index()
        if not config.elitism or pop.score_of(fitness) <= pop.scores[worst]:
            pop.replace(worst, Individual(child, fitness, batch.batch_id))
    if discarded > n_insertions // 2:
        logger.warning(f"{discarded}/{n_insertions} offspring were copies of a parent; the population may have converged")
    return evaluations


def step_steady_state(state: RunState, config: SteadyStateConfig, learner: Learner,
                      batch: Batch, variation: Variation) -> RunState:
    """One generation = ``pop_size`` insertions with replace-worst"""
    for pop in state.populations:
        state.evaluations += _insertions(state.rng, pop, len(pop), config, learner, batch, variation)
    return state


def _evolve_island(pop: Population, rng: np.random.Generator, config: SteadyStateConfig,
                   learner: Learner, batch: Batch, variation: Variation):
    evaluations = _insertions(rng, pop, len(pop), config, learner, batch, variation)
    return pop, rng, evaluations


def step_islands(state: RunState, config: SteadyStateConfig, learner: Learner, batch: Batch,
                 variation: Variation, n_workers: int = 1) -> RunState:
    """Advance every island one steady-state generation, one worker slot per island"""
    results = run_parallel(
        _evolve_island,
        [(pop, rng, config, learner, batch, variation)
         for pop, rng in zip(state.populations, state.island_rngs)],
        n_workers,
    )
    state.populations = [r[0] for r in results]
    state.island_rngs = [r[1] for r in results]
    state.evaluations += sum(r[2] for r in results)
    return state


def neighborhood(cell: int, config: CellularConfig) -> List[int]:
    """Cells within ``radius`` of ``cell`` on the torus, including the cell itself"""
    row, col = divmod(cell, config.grid_w)
    r = config.radius
    cells = set()
    for dr in range(-r, r + 1):
        for dc in range(-r, r + 1):
            if config.neighborhood is Neighborhood.VON_NEUMANN and abs(dr) + abs(dc) > r:
                continue
            cells.add(((row + dr) % config.grid_h) * config.grid_w + (col + dc) % config.grid_w)
    return sorted(cells)


def step_cellular(state: RunState, config: CellularConfig, tournament_size: int, learner: Learner,
                  batch: Batch, variation: Variation, n_workers: int = 1) -> RunState:
    """Synchronous sweep: offspring are bred from the pre-sweep grid, then committed together"""
    pop = state.populations[0]
    if len(pop) != config.size:
        raise ConfigError(f"Grid {config.grid_w}x{config.grid_h} does not match population size {len(pop)}")
    jobs, provenance = [], {}
    for cell in range(len(pop)):
        pool = neighborhood(cell, config)

        def select(pool=pool):
            i = tournament_index(state.rng, pop, tournament_size, batch.batch_id, pool=pool)
            return i, pop[i].tree

        child, parents = variation.offspring(state.rng, select)
        if child is None:
            continue
        provenance[cell] = parents
        jobs.append(EvalJob(cell, child, batch.batch_id))

    fitness = evaluate_all(jobs, learner, batch, n_workers)
    state.evaluations += len(jobs) * len(batch)
    for job in jobs:
        value = fitness[job.index]
        if pop.score_of(value) <= pop.scores[job.index]:
            pop.replace(job.index, Individual(job.tree, value, batch.batch_id))
    state.provenance = provenance
    return state


def migrate(islands: List[Population], config: IslandConfig) -> List[Population]:
    """Ring migration: island i sends copies of its best to island i+1, displacing its worst

    Emigrants are chosen from the pre-migration islands, so the order of
    islands does not matter.
    """
    m = config.n_migrants
    if m == 0 or len(islands) < 2:
        return islands
    emigrants = [[pop[i].copy() for i in pop.ranked()[:m]] for pop in islands]
    for source, migrants in enumerate(emigrants):
        dest = islands[(source + 1) % len(islands)]
        worst = dest.ranked()[-m:]
        for slot, migrant in zip(reversed(worst), migrants):
            dest.replace(slot, migrant)
    return islands


def evaluate_state(state: RunState, learner: Learner, batch: Batch, n_workers: int = 1) -> RunState:
    """(Re-)score every individual of every population on ``batch``"""
    jobs = []
    owners = []
    for p, pop in enumerate(state.populations):
        for i, ind in enumerate(pop):
            jobs.append(EvalJob(len(jobs), ind.tree, batch.batch_id))
            owners.append((p, i))
    fitness = evaluate_all(jobs, learner, batch, n_workers)
    for job, (p, i) in zip(jobs, owners):
        state.populations[p][i].scored(fitness[job.index], batch.batch_id)
    for pop in state.populations:
        pop.refresh()
    state.batch_id = batch.batch_id
    state.rescored += len(jobs) * len(batch)
    return state


def generation_best(state: RunState) -> Individual:
    pops = state.populations
    heads = [(pop.scores[pop.best_index()], pop.sizes[pop.best_index()], p) for p, pop in enumerate(pops)]
    _, _, p = min(heads)
    return pops[p][pops[p].best_index()]


def _record(state: RunState, learner: Learner, dataset: Dataset, online: bool, started: float) -> RunLogRow:
    best = generation_best(state)
    pop0 = state.populations[0]
    if online or state.best_ever is None or pop0.score_of(best.fitness) < pop0.score_of(state.best_ever.fitness):
        state.best_ever = best.copy()
    X_test, y_test = dataset.test_split()
    fitnesses = [ind.fitness for pop in state.populations for ind in pop]
    return RunLogRow(
        generation=state.generation,
        best_train=best.fitness,
        best_test=learner.test_metric(best.tree, X_test, y_test),
        mean_fitness=math.fsum(fitnesses) / len(fitnesses),
        evaluations=state.evaluations,
        elapsed_s=time.perf_counter() - started,
    )


def run(config, learner: Learner, dataset: Dataset, online: Optional[bool] = None,
        seed: Optional[int] = None, n_workers: int = 1) -> RunLog:
    """Execute ``config.generations`` generations of the configured dynamics

    Args:
        config: ExperimentConfig (dynamics, operators, sizes, batch settings)
        learner: Fitness/metric provider
        dataset: Training and test data
        online: Overrides ``config.online`` when given
        seed: Run seed; streams 0 (coordinator), 1 (batch shuffles) and
            2.. (islands) are derived from it
        n_workers: Worker processes for fitness evaluation

    Returns:
        RunLog with one row per generation (row 0 is the initial population)
    """
    online = config.online if online is None else online
    seed = config.seed if seed is None else seed
    started = time.perf_counter()

    space: TreeSpace = config.tree_space()
    variation = Variation.from_specs(config.operator_specs(), config.numeric_sigma,
                                     config.crossover_function_bias)
    steady = config.steady_state_config()

    if online:
        batch_size = config.batch_size or dataset.n_train
        if batch_size > dataset.n_train:
            raise ConfigError(f"batch_size {batch_size} exceeds the training split ({dataset.n_train} samples)")
        batches = BatchIterator(dataset, batch_size, rng_stream(seed, 1))
        batch = batches.next_batch()
    else:
        batches = None
        batch = dataset.train_batch(0)

    state = RunState(generation=0, populations=[], rng=rng_stream(seed, 0))
    minimization = learner.minimization
    if config.pop_dynamics is Dynamics.ISLAND:
        islands: IslandConfig = config.islands
        state.island_rngs = [rng_stream(seed, ISLAND_STREAM_OFFSET + i) for i in range(islands.n_islands)]
        state.populations = [
            Population([Individual(t) for t in ramped_half_and_half(r, space, islands.island_pop)], minimization)
            for r in state.island_rngs
        ]
    else:
        state.populations = [
            Population([Individual(t) for t in ramped_half_and_half(state.rng, space, config.pop_size)],
                       minimization)
        ]

    evaluate_state(state, learner, batch, n_workers)
    log = RunLog(test_metric=learner.test_metric_name)
    log.append(_record(state, learner, dataset, online, started))
    logger.info(f"Generation 0: best {log.final.best_train:.6g}, test {log.final.best_test:.6g}")

    for generation in range(1, config.generations + 1):
        if online:
            batch = batches.next_batch()
            evaluate_state(state, learner, batch, n_workers)

        if config.pop_dynamics is Dynamics.STEADY_STATE:
            step_steady_state(state, steady, learner, batch, variation)
        elif config.pop_dynamics is Dynamics.CELLULAR:
            step_cellular(state, config.cellular, steady.tournament_size, learner, batch, variation, n_workers)
        else:
            step_islands(state, steady, learner, batch, variation, n_workers)
            if generation % config.islands.migration_interval == 0:
                migrate(state.populations, config.islands)

        state.generation = generation
        log.append(_record(state, learner, dataset, online, started))
        logger.info(
            f"Generation {generation}: best {log.final.best_train:.6g}, "
            f"test {log.final.best_test:.6g}, evaluations {state.evaluations}"
        )

    log.best = state.best_ever
    log.rescored = state.rescored
    logger.debug(f"Sample evaluations: {state.evaluations} offspring, {state.rescored} re-scoring")
    return log
