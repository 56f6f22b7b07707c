import numpy as np
import pytest

from src.errors import ConfigError, UsageError
from src.gp.learners import (
    BinaryClassifier,
    Denoiser,
    RegressorLS,
    classify,
    error_rate,
    fitness_classification,
    fitness_denoise,
    fitness_regression,
    learner_for,
)
from src.gp.tree import Constant, Feature, Tree, TreeSpace, compile, eval_reference, parse_tree
from src.storage.datasets import gen_keijzer12, gen_noisy_patches
from src.storage.models import Batch


def test_regression_fitness(space2, keijzer_batch):
    assert fitness_regression(Tree((Constant(0.0),), space2),
                              Batch(np.array([[0.0, 0.0]]), np.array([5.0]))) == 25.0

    exact = parse_tree("(MUL x0 x1)", space2)
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert fitness_regression(exact, Batch(X, X[:, 0] * X[:, 1])) == 0.0


def test_constant_zero_mse_is_mean_square_of_targets(space2):
    data = gen_keijzer12(1000, seed=11)
    batch = data.train_batch()
    expected = sum(v * v for v in batch.y.tolist()) / len(batch)
    assert fitness_regression(Tree((Constant(0.0),), space2), batch) == pytest.approx(expected, rel=1e-12)


def test_regression_is_permutation_invariant(space2, keijzer_batch):
    t = parse_tree("(ADD (X2 x0) (DIV x1 0.3))", space2)
    order = np.random.default_rng(0).permutation(len(keijzer_batch))
    shuffled = Batch(keijzer_batch.X[order], keijzer_batch.y[order])
    assert fitness_regression(t, keijzer_batch) == fitness_regression(t, shuffled)


def test_classification_fitness(space2):
    assert error_rate(np.array([0.5, -0.2]), np.array([1, 0])) == 0.0
    assert list(classify(np.array([0.0, 1e-12, -3.0]))) == [0, 1, 0]
    batch = Batch(np.zeros((4, 2)), np.zeros(4))
    assert fitness_classification(Tree((Constant(-1.0),), space2), batch) == 0.0
    assert fitness_classification(Tree((Constant(1.0),), space2), batch) == 1.0


def test_classification_matches_recount(space2):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(500, 2))
    y = rng.integers(0, 2, size=500).astype(float)
    t = parse_tree("(SUB (MAX x0 0.1) (X2 x1))", space2)
    wrong = sum(int((eval_reference(t, row) > 0) != bool(label)) for row, label in zip(X, y))
    assert fitness_classification(t, Batch(X, y)) == wrong / 500


def test_denoise_identity_on_clean_patches(layered_primitives):
    data = gen_noisy_patches(50, patch_side=5, sigma=0.0, seed=2)
    space = TreeSpace(layered_primitives, 25, 4)
    center = Tree((Feature(12),), space)
    assert fitness_denoise(center, data.train_batch()) == 0.0


def test_window_mean_beats_noise_on_flat_patches(layered_primitives):
    space = TreeSpace(layered_primitives, 25, 3)
    vmean = parse_tree("(VMEAN v0:25)", space)
    center = Tree((Feature(12),), space)
    rng = np.random.default_rng(3)
    sigma = 0.1
    wins = 0
    for _ in range(100):
        level = rng.uniform(0.2, 0.8, size=(40, 1))
        X = level + rng.normal(0.0, sigma, size=(40, 25))
        batch = Batch(X, level[:, 0])
        if fitness_denoise(vmean, batch) < sigma ** 2 and fitness_denoise(vmean, batch) < fitness_denoise(center, batch):
            wins += 1
    assert wins >= 95


@pytest.mark.parametrize("fitness", [fitness_regression, fitness_classification, fitness_denoise])
def test_empty_batch_is_usage_error(space2, fitness):
    with pytest.raises(UsageError):
        fitness(Tree((Constant(0.0),), space2), Batch(np.empty((0, 2)), np.empty(0)))


def test_learner_registry():
    assert isinstance(learner_for("RegressorLS"), RegressorLS)
    assert isinstance(learner_for("BinaryClassifier"), BinaryClassifier)
    assert isinstance(learner_for("Denoiser"), Denoiser)
    assert all(learner_for(n).minimization for n in ("RegressorLS", "BinaryClassifier", "Denoiser"))
    with pytest.raises(ConfigError, match="Perceptron"):
        learner_for("Perceptron")


def test_test_metrics(space2):
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 0.0], [-2.0, 0.0]])
    y = np.array([1.0, 0.0, 0.0, 0.0])
    t = parse_tree("x0", space2)
    classifier = BinaryClassifier()
    assert classifier.test_metric(t, X, y) == 0.75
    assert list(classifier.predict(t, X)) == [1, 0, 1, 0]
    assert np.isnan(RegressorLS().test_metric(t, np.empty((0, 2)), np.empty(0)))
    assert RegressorLS().test_metric(t, X, y) == pytest.approx(np.mean((X[:, 0] - y) ** 2))
    assert np.array_equal(RegressorLS().predict(t, X), compile(t).evaluate(X))
