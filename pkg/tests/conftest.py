"""Shared fixtures"""
import numpy as np
import pytest

from src.gp.primitives import PrimitiveSet
from src.gp.tree import TreeSpace, parse_tree
from src.storage.models import Batch


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="also run benchmark reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


RELU_DIFF_TEXT = "(ADD (SUB (RELU x0) (RELU x1)) -0.002)"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scalar_primitives():
    return PrimitiveSet.default(with_mezzanine=False)


@pytest.fixture
def layered_primitives():
    return PrimitiveSet.default(with_mezzanine=True)


@pytest.fixture
def space2(scalar_primitives):
    """Two inputs, depth 6, scalar primitives only"""
    return TreeSpace(scalar_primitives, input_size=2, max_depth=6)


@pytest.fixture
def patch_space(layered_primitives):
    """3x3 patches, depth 6, scalar and mezzanine primitives"""
    return TreeSpace(layered_primitives, input_size=9, max_depth=6)


@pytest.fixture
def relu_diff(space2):
    """(max(x0,0) - max(x1,0)) + (-0.002)"""
    return parse_tree(RELU_DIFF_TEXT, space2)


@pytest.fixture
def keijzer_batch():
    rng = np.random.default_rng(7)
    X = rng.uniform(-3, 3, size=(200, 2))
    y = X[:, 0] * X[:, 1] + np.sin((X[:, 0] - 1) * (X[:, 1] - 1))
    return Batch(X, y)


def minimal_config(**overrides) -> dict:
    """Small, valid experiment config as a plain dict"""
    data = {
        "name": "tiny",
        "individual_class": "RegressorLS",
        "lowlevel": ["ADD", "SUB", "MUL", "DIV", "RELU", "MAX", "MIN", "MEAN", "X2", "SQRT"],
        "mezzanine": [],
        "ind_params": {"input_vector_size": 2, "complexity": 4},
        "operations": ["subtree_mutation", "protected_crossover", "numeric_mutation"],
        "operations_prob": [0.4, 0.4, 0.2],
        "operations_arity": [1, 2, 1],
        "pop_size": 20,
        "generations": 3,
        "pop_dynamics": "Steady_State",
        "online": False,
        "minimization": True,
        "n_jobs": 1,
        "seed": 5,
        "repetitions": 2,
        "dataset": {"kind": "keijzer12", "n": 60, "n_test": 20},
    }
    data.update(overrides)
    return data
