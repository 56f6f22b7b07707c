"""Reduced-scale reproductions of the benchmark claims; run with --run-slow"""
from pathlib import Path

import numpy as np
import pytest

from src.config import ExperimentConfig
from src.services.evaluation_scheduler import resolve_workers
from src.services.experiment_service import compare, execute_experiment, repetition_seed
from src.services.population_engine import run
from tests.conftest import minimal_config

pytestmark = pytest.mark.slow

DESK = Path(__file__).resolve().parent.parent / "configs" / "desk"
WORKERS = resolve_workers(4)


def desk(name: str) -> ExperimentConfig:
    return ExperimentConfig.from_file(DESK / f"{name}.json")


def paired(tmp_path, name_a: str, name_b: str):
    for name in (name_a, name_b):
        execute_experiment(desk(name), tmp_path / name, n_workers=WORKERS)
    return compare(tmp_path / name_a / "summary.csv", tmp_path / name_b / "summary.csv")


@pytest.mark.parametrize("path", sorted(DESK.glob("*.json")), ids=lambda p: p.stem)
def test_desk_runs_ignore_worker_count(path):
    config = ExperimentConfig.from_file(path).with_overrides(generations=5)
    dataset = config.build_dataset()
    logs = [run(config, config.learner(), dataset, seed=repetition_seed(config.seed, 0), n_workers=n)
            for n in (1, 1, 8)]
    records = [[row.as_record()[:-1] for row in log.rows] for log in logs]
    assert records[0] == records[1] == records[2]


@pytest.mark.parametrize("dynamics,extra", [
    ("Steady_State", {}),
    ("Cellular", {"cellular": {"grid_w": 10, "grid_h": 10}}),
    ("Island", {"islands": {"n_islands": 4, "migration_interval": 3}}),
])
def test_batched_best_never_gets_worse(dynamics, extra):
    config = ExperimentConfig.from_dict(minimal_config(
        pop_size=100, generations=10, pop_dynamics=dynamics,
        dataset={"kind": "keijzer12", "n": 200, "n_test": 50}, **extra))
    dataset = config.build_dataset()
    for rep in range(10):
        log = run(config, config.learner(), dataset, seed=repetition_seed(config.seed, rep))
        best = [row.best_train for row in log.rows]
        assert all(b <= a for a, b in zip(best, best[1:]))


def test_online_learning_is_faster_at_equal_accuracy(tmp_path):
    report = paired(tmp_path, "classification_online_desk", "classification_batched_desk")
    assert report.median_runtime_ratio < 0.6
    assert abs(report.median_test_delta) < 0.03


def test_islands_beat_panmictic_regression(tmp_path):
    report = paired(tmp_path, "keijzer12_multipop_desk", "keijzer12_panmictic_desk")
    pairs = report.pairs
    assert int((pairs["test_a"] <= pairs["test_b"]).sum()) >= 7


def test_mezzanine_primitives_help_denoising(tmp_path):
    report = paired(tmp_path, "denoise_mezzanine_desk", "denoise_low_desk")
    pairs = report.pairs
    assert int((pairs["test_a"] <= pairs["test_b"]).sum()) >= 7
    sigma = desk("denoise_mezzanine_desk").dataset.params["sigma"]
    assert float(np.median(pairs["test_a"])) < sigma ** 2


def test_steady_state_regression_learns():
    config = ExperimentConfig.from_dict(minimal_config(
        pop_size=100, generations=10, ind_params={"input_vector_size": 2, "complexity": 12},
        dataset={"kind": "keijzer12", "n": 500, "n_test": 100}))
    dataset = config.build_dataset()
    improved = 0
    for rep in range(10):
        log = run(config, config.learner(), dataset, seed=repetition_seed(config.seed, rep), n_workers=WORKERS)
        improved += log.final.best_train < log.rows[0].best_train
    assert improved >= 9
