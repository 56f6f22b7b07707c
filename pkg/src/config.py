"""Configuration loading and validation"""
import json
import os
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from .errors import ConfigError
from .gp.genetic_ops import OperatorSpec, build_operator_specs
from .gp.learners import Learner, learner_for
from .gp.primitives import PrimitiveSet
from .gp.tree import TreeSpace
from .services.population_engine import (
    CellularConfig,
    Dynamics,
    IslandConfig,
    Neighborhood,
    SteadyStateConfig,
)
from .storage.datasets import (
    Dataset,
    TaskKind,
    gen_keijzer12,
    gen_noisy_patches,
    gen_two_class,
    load_csv,
    load_patch_csv,
)
from .utils.logger import setup_logger

logger = setup_logger(__name__)

# Load environment variables from .env file
load_dotenv()


class Settings:
    """Process-level settings from the environment"""

    def __init__(self):
        """Load and validate settings"""
        self.log_level = os.getenv("GP_LOG_LEVEL", "INFO").upper()
        self.output_dir = os.getenv("GP_OUTPUT_DIR", "results")

        jobs = os.getenv("GP_JOBS", "").strip()
        self.jobs: Optional[int] = None
        if jobs:
            try:
                self.jobs = int(jobs)
            except ValueError:
                raise ConfigError(f"GP_JOBS must be an integer, got '{jobs}'") from None
            if self.jobs < 1:
                raise ConfigError("GP_JOBS must be at least 1")


DATASET_KINDS = ("csv", "patch_csv", "keijzer12", "noisy_patches", "two_class")


@dataclass(frozen=True)
class DatasetSpec:
    """Where the data comes from; ``params`` are passed to the loader/generator"""
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"dataset.kind must be one of {', '.join(DATASET_KINDS)}, got '{self.kind}'")

    def build(self, default_seed: int = 0) -> Dataset:
        p = dict(self.params)
        p.setdefault("seed", default_seed)
        try:
            if self.kind == "csv":
                return load_csv(self._path(p.pop("path")), p.pop("label_column"),
                                task=TaskKind(p.pop("task", TaskKind.CLASSIFICATION.value)), **p)
            if self.kind == "patch_csv":
                return load_patch_csv(self._path(p.pop("path")), **p)
            if self.kind == "keijzer12":
                return gen_keijzer12(**p)
            if self.kind == "noisy_patches":
                return gen_noisy_patches(**p)
            return gen_two_class(**p)
        except (TypeError, KeyError) as e:
            raise ConfigError(f"dataset ({self.kind}): invalid or missing parameter: {e}") from e

    def _path(self, value: str) -> Path:
        path = Path(value)
        return path if path.is_absolute() else self.base_dir / path


@dataclass(frozen=True)
class ExperimentConfig:
    """Full run description; keys match the GeneticProgram constructor arguments"""
    individual_class: str
    lowlevel: Tuple[str, ...]
    input_vector_size: int
    complexity: int
    operations: Tuple[str, ...]
    operations_prob: Tuple[float, ...]
    pop_size: int
    generations: int
    dataset: Optional[DatasetSpec] = None
    name: str = "experiment"
    mezzanine: Tuple[str, ...] = ()
    window_length: Optional[int] = None
    const_range: Tuple[float, float] = (-1.0, 1.0)
    operations_arity: Optional[Tuple[int, ...]] = None
    numeric_sigma: float = 0.1
    crossover_function_bias: Optional[float] = None
    pop_dynamics: Dynamics = Dynamics.STEADY_STATE
    tournament_size: int = 3
    elitism: bool = True
    cellular: Optional[CellularConfig] = None
    islands: Optional[IslandConfig] = None
    online: bool = False
    batch_size: Optional[int] = None
    minimization: bool = True
    n_jobs: Optional[int] = None
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
        config = cls.from_dict(data, base_dir=path.parent)
        logger.info(f"Loaded config '{config.name}' from {path}")
        return config

    @classmethod
    def from_dict(cls, data: Dict[str, Any], base_dir: Path = Path("."),
                  require_dataset: bool = True) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("Config must be a JSON object")
        data = dict(data)
        known = {f.name for f in fields(cls)} | {"ind_params"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"Unknown config field(s): {', '.join(unknown)}")

        ind_params = data.pop("ind_params", None) or {}
        for key in ("input_vector_size", "complexity", "window_length", "const_range"):
            if key in ind_params:
                data.setdefault(key, ind_params[key])
        missing = [f.name for f in fields(cls)
                   if f.name not in data and f.default is MISSING and f.default_factory is MISSING]
        if missing:
            raise ConfigError(f"Missing required config field(s): {', '.join(missing)}")

        if require_dataset and data.get("dataset") is None:
            raise ConfigError("Missing required config field: dataset")
        try:
            dataset = data.pop("dataset", None)
            if dataset is not None:
                if not isinstance(dataset, dict) or "kind" not in dataset:
                    raise ConfigError("dataset must be an object with a 'kind' field")
                dataset = dict(dataset)
                data["dataset"] = DatasetSpec(dataset.pop("kind"), dataset, Path(base_dir))

            data["pop_dynamics"] = _enum(Dynamics, data.get("pop_dynamics", Dynamics.STEADY_STATE.value),
                                         "pop_dynamics")
            for key in ("lowlevel", "mezzanine", "operations"):
                if key in data:
                    data[key] = tuple(data[key] or ())
            for key in ("operations_prob", "const_range"):
                if key in data:
                    data[key] = tuple(float(v) for v in data[key])
            if data.get("operations_arity") is not None:
                data["operations_arity"] = tuple(int(v) for v in data["operations_arity"])

            pop_size = int(data["pop_size"])
            if data.get("cellular") is not None:
                data["cellular"] = _cellular(data["cellular"], pop_size)
            elif data["pop_dynamics"] is Dynamics.CELLULAR:
                data["cellular"] = _cellular({}, pop_size)
            if data.get("islands") is not None:
                data["islands"] = _islands(data["islands"], pop_size)
            elif data["pop_dynamics"] is Dynamics.ISLAND:
                raise ConfigError("pop_dynamics 'Island' requires an 'islands' section")
            return cls(**data)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"Invalid config value: {e}") from e

    def _validate(self):
        """Validate configuration values"""
        learner_for(self.individual_class)
        self.primitive_set()
        self.operator_specs()
        if self.input_vector_size < 1:
            raise ConfigError(f"input_vector_size must be >= 1, got {self.input_vector_size}")
        if self.complexity < 1:
            raise ConfigError(f"complexity (max tree depth) must be >= 1, got {self.complexity}")
        if self.window_length is not None and not 1 <= self.window_length <= self.input_vector_size:
            raise ConfigError(f"window_length must be in [1, input_vector_size], got {self.window_length}")
        if not self.const_range[0] < self.const_range[1]:
            raise ConfigError(f"const_range must be increasing, got {self.const_range}")
        if self.numeric_sigma < 0:
            raise ConfigError(f"numeric_sigma must be >= 0, got {self.numeric_sigma}")
        if self.crossover_function_bias is not None and not 0 <= self.crossover_function_bias <= 1:
            raise ConfigError(f"crossover_function_bias must be in [0, 1], got {self.crossover_function_bias}")
        self.steady_state_config()
        if not self.minimization:
            raise ConfigError(f"{self.individual_class} minimizes its fitness; minimization must be true")
        if self.online and self.batch_size is not None and self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pop_dynamics is Dynamics.CELLULAR and self.cellular.size != self.pop_size:
            raise ConfigError(
                f"cellular grid {self.cellular.grid_w}x{self.cellular.grid_h} must hold pop_size={self.pop_size}"
            )
        if self.pop_dynamics is Dynamics.ISLAND:
            total = self.islands.n_islands * self.islands.island_pop
            if total != self.pop_size:
                raise ConfigError(
                    f"n_islands * island_pop = {total} must equal pop_size={self.pop_size}"
                )
        if self.n_jobs is not None and self.n_jobs < 1:
            raise ConfigError(f"n_jobs must be >= 1, got {self.n_jobs}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")

    def primitive_set(self) -> PrimitiveSet:
        return PrimitiveSet.from_ids(self.lowlevel, self.mezzanine)

    def tree_space(self) -> TreeSpace:
        return TreeSpace(self.primitive_set(), self.input_vector_size, self.complexity,
                         self.window_length, self.const_range)

    def operator_specs(self) -> Tuple[OperatorSpec, ...]:
        return build_operator_specs(self.operations, self.operations_prob, self.operations_arity)

    def steady_state_config(self) -> SteadyStateConfig:
        pop = self.islands.island_pop if self.pop_dynamics is Dynamics.ISLAND and self.islands else self.pop_size
        return SteadyStateConfig(pop, self.generations, self.tournament_size, self.elitism)

    def learner(self) -> Learner:
        return learner_for(self.individual_class)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes) if changes else self

    def build_dataset(self) -> Dataset:
        """Load or generate the data, seeding generators with the master seed unless the dataset section pins one"""
        if self.dataset is None:
            raise ConfigError(f"Config '{self.name}' has no dataset section")
        dataset = self.dataset.build(default_seed=self.seed)
        self.check_dataset(dataset)
        return dataset

    def check_dataset(self, dataset: Dataset) -> None:
        """Cross-checks that need the loaded data"""
        if dataset.input_size != self.input_vector_size:
            raise ConfigError(
                f"input_vector_size={self.input_vector_size} but the dataset has {dataset.input_size} features"
            )
        if self.online and self.batch_size is not None and self.batch_size > dataset.n_train:
            raise ConfigError(
                f"batch_size {self.batch_size} exceeds the training split ({dataset.n_train} samples)"
            )


def _enum(enum_cls, value, field_name: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        raise ConfigError(f"{field_name} must be one of {choices}, got '{value}'") from None


def _cellular(section: Dict[str, Any], pop_size: int) -> CellularConfig:
    section = dict(section)
    if "grid_w" not in section and "grid_h" not in section:
        side = int(round(pop_size ** 0.5))
        if side * side != pop_size:
            raise ConfigError(f"cellular grid_w/grid_h required: pop_size={pop_size} is not a square")
        section["grid_w"] = section["grid_h"] = side
    elif "grid_h" not in section:
        section["grid_h"] = pop_size // int(section["grid_w"])
    elif "grid_w" not in section:
        section["grid_w"] = pop_size // int(section["grid_h"])
    return CellularConfig(
        grid_w=int(section["grid_w"]),
        grid_h=int(section["grid_h"]),
        neighborhood=_enum(Neighborhood, section.get("neighborhood", Neighborhood.VON_NEUMANN.value),
                           "cellular.neighborhood"),
        radius=int(section.get("radius", 1)),
    )


def _islands(section: Dict[str, Any], pop_size: int) -> IslandConfig:
    n_islands = int(section["n_islands"])
    if n_islands < 1:
        raise ConfigError(f"islands.n_islands must be >= 1, got {n_islands}")
    island_pop = int(section.get("island_pop", pop_size // n_islands))
    n_migrants = section.get("n_migrants")
    return IslandConfig(
        n_islands=n_islands,
        island_pop=island_pop,
        migration_interval=int(section.get("migration_interval", 10)),
        n_migrants=None if n_migrants is None else int(n_migrants),
        topology=section.get("topology", "Ring"),
    )


def operator_names(config: ExperimentConfig) -> List[str]:
    return [spec.op.value for spec in config.operator_specs()]
