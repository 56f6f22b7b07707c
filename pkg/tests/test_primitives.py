import math

import numpy as np
import pytest

from src.errors import ConfigError, MalformedTreeError
from src.gp.primitives import (
    DEFAULT_LOWLEVEL,
    DEFAULT_MEZZANINE,
    VALUE_BOUND,
    Layer,
    PrimitiveSet,
    apply,
    lookup,
    lookup_id,
)


def p(id):
    return lookup_id(id)


def test_documented_values():
    assert apply(p("ADD"), [2, 3]) == 5
    assert apply(p("DIV"), [7, 0]) == 1.0
    assert apply(p("SQRT"), [-4]) == 2
    assert apply(p("RELU"), [-1.5]) == 0
    assert apply(p("VMEAN"), [[1, 2, 3, 6]]) == 3


def test_binary_max_min_mean():
    assert apply(p("MAX"), [-1, 4]) == 4
    assert apply(p("MIN"), [-1, 4]) == -1
    assert apply(p("MEAN"), [-1, 4]) == 1.5


def test_div_near_zero_threshold():
    assert apply(p("DIV"), [3, 1e-10]) == 1.0
    assert apply(p("DIV"), [3, -1e-10]) == 1.0
    assert apply(p("DIV"), [3, 1e-9]) == pytest.approx(3e9)


def test_x2_clamps_overflow():
    assert apply(p("X2"), [1e200]) == VALUE_BOUND
    assert apply(p("MUL"), [-1e100, 1e100]) == -VALUE_BOUND


def test_default_sets():
    defaults = PrimitiveSet.default()
    assert {q.id for q in defaults.low} == {
        "ADD", "SUB", "MUL", "DIV", "RELU", "MAX", "MIN", "MEAN", "X2", "SQRT"}
    assert {q.id for q in defaults.mezz} == {"VMEAN", "VMIN", "VMAX"}
    assert PrimitiveSet.default(with_mezzanine=False).mezz == ()


def test_lookup():
    defaults = PrimitiveSet.default()
    add = lookup(defaults, "ADD")
    assert add.layer is Layer.LOW_LEVEL and add.arity == 2
    vmean = lookup(defaults, "VMEAN")
    assert vmean.layer is Layer.MEZZANINE and vmean.arity == 1
    with pytest.raises(ConfigError, match="FOO"):
        lookup(defaults, "FOO")
    with pytest.raises(ConfigError):
        lookup(PrimitiveSet.default(with_mezzanine=False), "VMEAN")


def test_set_validation():
    with pytest.raises(ConfigError, match="unique"):
        PrimitiveSet.from_ids(["ADD", "ADD"])
    with pytest.raises(ConfigError):
        PrimitiveSet.from_ids([], ["VMEAN"])
    with pytest.raises(ConfigError, match="not a low level"):
        PrimitiveSet.from_ids(["ADD", "VMAX"])
    with pytest.raises(ConfigError, match="not a mezzanine"):
        PrimitiveSet.from_ids(["ADD"], ["SUB"])


def test_arity_mismatch_is_malformed_tree():
    with pytest.raises(MalformedTreeError):
        apply(p("ADD"), [1.0])
    with pytest.raises(MalformedTreeError):
        apply(p("VMEAN"), [[1.0], [2.0]])
    with pytest.raises(MalformedTreeError):
        apply(p("VMAX"), [[]])


def test_totality_on_random_arguments():
    rng = np.random.default_rng(0)
    for id in DEFAULT_LOWLEVEL:
        prim = p(id)
        for args in rng.uniform(-1e6, 1e6, size=(10_000, prim.arity)):
            assert math.isfinite(apply(prim, list(args)))


def test_div_inverts_multiplication():
    rng = np.random.default_rng(1)
    for a, b in rng.uniform(-1e6, 1e6, size=(2000, 2)):
        if abs(b) >= 1e-9:
            assert apply(p("DIV"), [a, b]) * b == pytest.approx(a, rel=1e-12)


def test_vector_reducers_are_ordered():
    rng = np.random.default_rng(2)
    for _ in range(500):
        v = list(rng.normal(size=int(rng.integers(1, 20))))
        assert apply(p("VMIN"), [v]) <= apply(p("VMEAN"), [v]) <= apply(p("VMAX"), [v])


@pytest.mark.parametrize("id", DEFAULT_LOWLEVEL + DEFAULT_MEZZANINE)
def test_scalar_and_vector_forms_agree_bitwise(id):
    prim = p(id)
    rng = np.random.default_rng(3)
    if prim.layer is Layer.MEZZANINE:
        windows = rng.normal(scale=100.0, size=(200, 7))
        fast = prim.vector(windows)
        slow = [apply(prim, [row]) for row in windows]
    else:
        args = rng.normal(scale=1e3, size=(prim.arity, 200))
        args[:, :10] = 0.0
        fast = prim.vector(*args)
        slow = [apply(prim, list(column)) for column in args.T]
    assert np.array_equal(fast, np.array(slow))


@pytest.mark.parametrize("id", DEFAULT_MEZZANINE)
def test_reducers_stay_finite_on_huge_windows(id):
    prim = p(id)
    window = [1e308, 1e308, 1e308, 1e308]
    scalar = apply(prim, [window])
    vector = prim.vector(np.array([window, [-x for x in window]]))
    assert scalar == VALUE_BOUND
    assert np.array_equal(vector, np.array([VALUE_BOUND, -VALUE_BOUND]))


def test_vmean_of_two_huge_values():
    assert apply(p("VMEAN"), [[1e308, 1e308]]) == VALUE_BOUND
