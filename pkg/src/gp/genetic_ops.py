"""Variation operators; every operator returns a valid tree within the depth bound"""
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..utils.logger import setup_logger
from .tree import (
    Constant,
    Function,
    Tree,
    grow_subtree,
    node_depths,
    replace_subtree,
    slot_type,
    subtree_height,
    subtree_span,
)

logger = setup_logger(__name__)

CROSSOVER_ATTEMPTS = 50
PROBABILITY_TOLERANCE = 1e-9


class Operator(str, Enum):
    SUBTREE_MUTATION = "subtree_mutation"
    PROTECTED_CROSSOVER = "protected_crossover"
    NUMERIC_MUTATION = "numeric_mutation"
    POINT_MUTATION_I2 = "mutation_i2"


# Operators may also be spelled as learner handles, e.g. RegressorLS.mutation
OPERATOR_ALIASES = {
    "mutation": Operator.SUBTREE_MUTATION,
    "subtree_mutation": Operator.SUBTREE_MUTATION,
    "protected_crossover": Operator.PROTECTED_CROSSOVER,
    "crossover": Operator.PROTECTED_CROSSOVER,
    "numeric_mutation": Operator.NUMERIC_MUTATION,
    "mutation_i2": Operator.POINT_MUTATION_I2,
    "point_mutation": Operator.POINT_MUTATION_I2,
    "point_mutation_i2": Operator.POINT_MUTATION_I2,
}

OPERATOR_ARITY = {
    Operator.SUBTREE_MUTATION: 1,
    Operator.PROTECTED_CROSSOVER: 2,
    Operator.NUMERIC_MUTATION: 1,
    Operator.POINT_MUTATION_I2: 1,
}


@dataclass(frozen=True)
class OperatorSpec:
    op: Operator
    probability: float
    arity: int


def parse_operator(name: str) -> Operator:
    key = name.split(".")[-1].strip()
    try:
        return OPERATOR_ALIASES[key]
    except KeyError:
        raise ConfigError(
            f"Unknown genetic operation '{name}'. Known: {', '.join(sorted(OPERATOR_ALIASES))}"
        ) from None


def build_operator_specs(names: Sequence[str], probs: Sequence[float],
                         arities: Optional[Sequence[int]] = None) -> Tuple[OperatorSpec, ...]:
    """Validate the operations / operations_prob / operations_arity triple"""
    if not names:
        raise ConfigError("operations must list at least one genetic operation")
    if len(probs) != len(names):
        raise ConfigError(f"operations_prob has {len(probs)} entries for {len(names)} operations")
    if arities is not None and len(arities) != len(names):
        raise ConfigError(f"operations_arity has {len(arities)} entries for {len(names)} operations")
    specs = []
    for i, name in enumerate(names):
        op = parse_operator(name)
        p = float(probs[i])
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"operations_prob[{i}] must be in [0, 1], got {p}")
        arity = OPERATOR_ARITY[op]
        if arities is not None and int(arities[i]) != arity:
            raise ConfigError(f"operations_arity[{i}] for {op.value} must be {arity}, got {arities[i]}")
        specs.append(OperatorSpec(op, p, arity))
    total = sum(s.probability for s in specs)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise ConfigError(f"operations_prob must sum to 1 (got {total})")
    return tuple(specs)


def subtree_mutation(rng: np.random.Generator, parent: Tree) -> Tree:
    """Replace a uniformly chosen subtree with a fresh Grow subtree that fits the slot"""
    index = int(rng.integers(len(parent.nodes)))
    span = subtree_span(parent, index)
    budget = parent.max_depth - node_depths(parent.nodes)[index]
    donor = grow_subtree(rng, parent.space, budget, slot_type(parent.nodes[index]))
    return replace_subtree(parent, span, donor)


def protected_crossover(rng: np.random.Generator, a: Tree, b: Tree,
                        function_bias: Optional[float] = None) -> Tree:
    """Insert a subtree of ``b`` into ``a`` at a type-legal slot without exceeding the depth bound

    Slot and donor are drawn uniformly (or with ``function_bias`` probability
    of picking a function node) and redrawn until legal, at most
    CROSSOVER_ATTEMPTS times; after that a copy of ``a`` is returned.
    """
    if a.space.max_depth != b.space.max_depth or a.input_size != b.input_size:
        raise ConfigError("Crossover parents must share max depth and input size")
    depths_a = node_depths(a.nodes)
    depths_b = node_depths(b.nodes)
    for _ in range(CROSSOVER_ATTEMPTS):
        slot = _pick_node(rng, a, function_bias)
        donor = _pick_node(rng, b, function_bias)
        if slot_type(a.nodes[slot]) is not slot_type(b.nodes[donor]):
            continue
        if depths_a[slot] + subtree_height(b.nodes, depths_b, donor) > a.max_depth:
            continue
        start, end = subtree_span(b, donor)
        return replace_subtree(a, subtree_span(a, slot), b.nodes[start:end])
    logger.debug("Crossover found no legal pair, falling back to reproduction")
    return Tree(a.nodes, a.space)


def _pick_node(rng: np.random.Generator, t: Tree, function_bias: Optional[float]) -> int:
    if function_bias is None:
        return int(rng.integers(len(t.nodes)))
    functions = [i for i, n in enumerate(t.nodes) if isinstance(n, Function)]
    others = [i for i, n in enumerate(t.nodes) if not isinstance(n, Function)]
    pool = functions if functions and (not others or rng.random() < function_bias) else others
    return pool[int(rng.integers(len(pool)))]


def numeric_mutation(rng: np.random.Generator, parent: Tree, sigma: float = 0.1) -> Tree:
    """Perturb every constant with independent N(0, sigma^2) noise"""
    if sigma < 0:
        raise ConfigError(f"numeric mutation sigma must be >= 0, got {sigma}")
    sites = [i for i, n in enumerate(parent.nodes) if isinstance(n, Constant)]
    if not sites or sigma == 0:
        return Tree(parent.nodes, parent.space)
    noise = rng.normal(0.0, sigma, size=len(sites))
    nodes = list(parent.nodes)
    for i, delta in zip(sites, noise):
        nodes[i] = Constant(float(nodes[i].value + delta))
    return Tree(tuple(nodes), parent.space)


def point_mutation_i2(rng: np.random.Generator, parent: Tree) -> Tree:
    """Swap one internal function node for another primitive of the same layer and arity

    ``mutation_i2`` names this operator: the "i" stands for internal node.
    """
    primitives = parent.space.primitives
    candidates = [
        i for i, n in enumerate(parent.nodes)
        if isinstance(n, Function) and primitives.same_kind(n.primitive)
    ]
    if not candidates:
        return Tree(parent.nodes, parent.space)
    index = candidates[int(rng.integers(len(candidates)))]
    alternatives = primitives.same_kind(parent.nodes[index].primitive)
    replacement = alternatives[int(rng.integers(len(alternatives)))]
    nodes = list(parent.nodes)
    nodes[index] = Function(replacement)
    return Tree(tuple(nodes), parent.space)


VariationFn = Callable[..., Tree]


def bind_operators(specs: Sequence[OperatorSpec], numeric_sigma: float = 0.1,
                   function_bias: Optional[float] = None) -> List[Tuple[VariationFn, int]]:
    """Resolve specs to ``(callable(rng, *parents), arity)`` pairs; picklable for workers"""
    table: Dict[Operator, VariationFn] = {
        Operator.SUBTREE_MUTATION: subtree_mutation,
        Operator.PROTECTED_CROSSOVER: partial(protected_crossover, function_bias=function_bias),
        Operator.NUMERIC_MUTATION: partial(numeric_mutation, sigma=numeric_sigma),
        Operator.POINT_MUTATION_I2: point_mutation_i2,
    }
    return [(table[s.op], s.arity) for s in specs]