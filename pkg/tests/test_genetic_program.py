import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import GridSearchCV

from src.errors import ConfigError, UsageError
from src.gp.learners import BinaryClassifier, Denoiser, RegressorLS
from src.gp.primitives import DEFAULT_LOWLEVEL
from src.services.genetic_program import GeneticProgram, GPClassifier, GPRegressor


@pytest.fixture(autouse=True)
def restore_primitives():
    yield
    GeneticProgram.lowlevel = DEFAULT_LOWLEVEL
    GeneticProgram.mezzanine = ()


def make_gp(individual_class=RegressorLS, estimator=GeneticProgram, **kwargs):
    params = dict(
        operations=[RegressorLS.mutation, RegressorLS.protected_crossover, RegressorLS.numeric_mutation],
        operations_prob=[0.4, 0.4, 0.2],
        operations_arity=[1, 2, 1],
        ind_params={"input_vector_size": 2, "complexity": 4},
        pop_size=20,
        generations=3,
        n_jobs=1,
        seed=4,
    )
    params.update(kwargs)
    return estimator(individual_class, **params)


def regression_data(n=80, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    return X, X[:, 0] * X[:, 1] + X[:, 0]


def test_fit_predict_score():
    X, y = regression_data()
    gp = make_gp().fit(X[:60], y[:60], X[60:], y[60:])
    assert gp.predict(X[60:]).shape == (20,)
    assert np.isfinite(gp.score(X[60:], y[60:]))
    assert len(gp.run_log_.rows) == 4
    assert gp.best_.fitness <= gp.run_log_.rows[0].best_train
    assert gp.n_features_in_ == 2


def test_fit_is_reproducible():
    X, y = regression_data()
    a = make_gp().fit(X, y)
    b = make_gp().fit(X, y)
    assert str(a.model_) == str(b.model_)
    assert np.isnan(a.run_log_.final.best_test)


def test_unfitted_model_raises():
    with pytest.raises(NotFittedError):
        make_gp().predict(np.zeros((1, 2)))
    with pytest.raises(NotFittedError):
        make_gp().model_


def test_feature_count_must_match():
    X, y = regression_data()
    with pytest.raises(UsageError, match="input_vector_size"):
        make_gp(ind_params={"input_vector_size": 3, "complexity": 4}).fit(X, y)


def test_predict_checks_feature_count():
    X, y = regression_data()
    gp = make_gp().fit(X, y)
    with pytest.raises(UsageError, match="fitted on 2"):
        gp.predict(np.zeros((3, 5)))


def test_input_size_defaults_to_column_count():
    X, y = regression_data()
    gp = make_gp(ind_params=None).fit(X, y)
    assert gp.config_.input_vector_size == 2
    assert gp.config_.complexity == 6


def test_invalid_parameters_fail_at_fit_time():
    X, y = regression_data()
    gp = make_gp(operations_prob=[0.5, 0.5, 0.5])
    with pytest.raises(ConfigError, match="sum to 1"):
        gp.fit(X, y)


def test_classifier_predicts_labels():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 2))
    y = (X[:, 0] > 0).astype(float)
    gp = make_gp(BinaryClassifier).fit(X, y)
    assert set(np.unique(gp.predict(X))) <= {0, 1}
    assert 0.0 <= gp.score(X, y) <= 1.0
    assert gp.classes_.tolist() == [0.0, 1.0]


def test_classifier_rejects_other_labels():
    X, _ = regression_data()
    with pytest.raises(UsageError, match="labels"):
        make_gp(BinaryClassifier).fit(X, np.arange(len(X)) % 3)


def test_operation_names_are_accepted():
    X, y = regression_data()
    gp = make_gp("RegressorLS", operations=["subtree_mutation", "protected_crossover", "numeric_mutation"])
    assert gp.fit(X, y).config_.operations == ("subtree_mutation", "protected_crossover", "numeric_mutation")


def test_set_primitives_applies_to_later_fits():
    X, y = regression_data()
    gp = make_gp()
    GeneticProgram.set_primitives(["ADD", "MUL"])
    assert gp.fit(X, y).config_.lowlevel == ("ADD", "MUL")
    assert GPRegressor.lowlevel == ("ADD", "MUL")
    with pytest.raises(ConfigError):
        GeneticProgram.set_primitives(["ADD", "VMEAN"])


def test_islands_section():
    X, y = regression_data()
    gp = make_gp(pop_dynamics="Island", islands={"n_islands": 2, "migration_interval": 1}).fit(X, y)
    assert gp.config_.islands.island_pop == 10
    assert gp.best_ is not None


def test_params_round_trip_through_clone():
    gp = make_gp(pop_size=30, tournament_size=4)
    params = gp.get_params()
    assert params["pop_size"] == 30
    assert params["tournament_size"] == 4
    assert params["individual_class"] is RegressorLS
    copy = clone(gp)
    assert copy.get_params()["ind_params"] == {"input_vector_size": 2, "complexity": 4}
    assert not hasattr(copy, "best_")
    copy.set_params(generations=1)
    assert copy.generations == 1
    assert gp.generations == 3


def test_grid_search_over_population_size():
    X, y = regression_data(n=60)
    search = GridSearchCV(make_gp(estimator=GPRegressor, generations=2), {"pop_size": [10, 20]}, cv=2)
    search.fit(X, y)
    assert search.best_params_["pop_size"] in (10, 20)
    assert search.predict(X).shape == (60,)


def test_regressor_scores_with_r2():
    X, y = regression_data()
    gp = make_gp(estimator=GPRegressor).fit(X, y)
    assert gp.score(X, y) <= 1.0
    assert gp.score(X, y) == pytest.approx(1.0 - np.mean((gp.predict(X) - y) ** 2) / np.var(y))


def test_typed_estimators_reject_the_wrong_learner():
    X, y = regression_data()
    with pytest.raises(ConfigError, match="GPRegressor"):
        make_gp(BinaryClassifier, estimator=GPRegressor).fit(X, (y > 0).astype(float))
    with pytest.raises(ConfigError, match="GPClassifier"):
        make_gp(Denoiser, estimator=GPClassifier).fit(X, y)


def test_classifier_defaults_to_binary_learner():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 2))
    y = (X[:, 1] > 0).astype(float)
    gp = make_gp(None, estimator=GPClassifier).fit(X, y)
    assert gp.learner_.name == "BinaryClassifier"
    assert 0.0 <= gp.score(X, y) <= 1.0
