"""Expression trees: representation, random generation, evaluation and serialization

A tree is stored as a flat prefix sequence of nodes (root at index 0); the
children of a function node follow it in order. Depth convention: a single
node has depth 0.

Text format (one tree per line)::

    tree   := CONST | 'x' INDEX | '(' ID arg+ ')'
    arg    := tree | 'v' START ':' LENGTH      # window, only under a mezzanine ID

e.g. ``(ADD (SUB (RELU x0) (RELU x1)) -0.002)`` or ``(VMEAN v0:81)``.
Constants are printed with 17 significant digits so they round-trip exactly.
"""
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import MalformedTreeError
from .primitives import Layer, PrimitiveSet, PrimitiveSignature, apply, lookup


@dataclass(frozen=True)
class Function:
    primitive: PrimitiveSignature

    @property
    def arity(self) -> int:
        return self.primitive.arity


@dataclass(frozen=True)
class Feature:
    index: int


@dataclass(frozen=True)
class Window:
    """A contiguous slice of the input vector, consumed by a mezzanine function"""
    start: int
    length: int


@dataclass(frozen=True)
class Constant:
    value: float


Node = Union[Function, Feature, Window, Constant]


class Method(str, Enum):
    GROW = "grow"
    FULL = "full"


class SlotType(str, Enum):
    SCALAR = "scalar"
    VECTOR = "vector"


@dataclass(frozen=True)
class TreeSpace:
    """Everything a tree needs to know about the problem it lives in"""
    primitives: PrimitiveSet
    input_size: int
    max_depth: int
    window_length: Optional[int] = None
    const_range: Tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.input_size < 1:
            raise MalformedTreeError(f"input_size must be >= 1, got {self.input_size}")
        if self.max_depth < 0:
            raise MalformedTreeError(f"max_depth must be >= 0, got {self.max_depth}")


@dataclass(frozen=True)
class Tree:
    nodes: Tuple[Node, ...]
    space: TreeSpace

    @property
    def max_depth(self) -> int:
        return self.space.max_depth

    @property
    def input_size(self) -> int:
        return self.space.input_size

    def __len__(self) -> int:
        return len(self.nodes)

    def __str__(self) -> str:
        return to_string(self)


def node_arity(node: Node) -> int:
    return node.arity if isinstance(node, Function) else 0


def slot_type(node: Node) -> SlotType:
    return SlotType.VECTOR if isinstance(node, Window) else SlotType.SCALAR


# Tree algebra

def node_depths(nodes: Sequence[Node]) -> List[int]:
    """Depth of every node of a prefix sequence"""
    depths = []
    open_slots: List[int] = []
    for node in nodes:
        depths.append(len(open_slots))
        arity = node_arity(node)
        if arity:
            open_slots.append(arity)
            continue
        while open_slots:
            open_slots[-1] -= 1
            if open_slots[-1] > 0:
                break
            open_slots.pop()
    return depths


def depth(t: Union[Tree, Sequence[Node]]) -> int:
    nodes = t.nodes if isinstance(t, Tree) else t
    return max(node_depths(nodes))


def size(t: Tree) -> int:
    return len(t.nodes)


def subtree_span(t: Union[Tree, Sequence[Node]], index: int) -> Tuple[int, int]:
    """Half-open index range ``[start, end)`` of the subtree rooted at ``index``"""
    nodes = t.nodes if isinstance(t, Tree) else t
    if not 0 <= index < len(nodes):
        raise MalformedTreeError(f"Node index {index} out of range for a tree of size {len(nodes)}")
    pending = 1
    end = index
    while pending:
        pending += node_arity(nodes[end]) - 1
        end += 1
    return index, end


def subtree_height(nodes: Sequence[Node], depths: Sequence[int], index: int) -> int:
    start, end = subtree_span(nodes, index)
    return max(depths[start:end]) - depths[index]


def replace_subtree(t: Tree, span: Tuple[int, int], donor: Union[Tree, Sequence[Node]]) -> Tree:
    """Return a new tree with ``t.nodes[span]`` replaced by the donor subtree

    Raises:
        MalformedTreeError: if the donor does not fit the slot's layer type or
            the result exceeds the depth bound.
    """
    start, end = span
    donor_nodes = tuple(donor.nodes if isinstance(donor, Tree) else donor)
    if not donor_nodes:
        raise MalformedTreeError("Donor subtree is empty")
    if slot_type(t.nodes[start]) is not slot_type(donor_nodes[0]):
        raise MalformedTreeError(
            f"Cannot place a {slot_type(donor_nodes[0]).value} subtree into a "
            f"{slot_type(t.nodes[start]).value} slot"
        )
    slot_depth = node_depths(t.nodes)[start]
    if slot_depth + depth(donor_nodes) > t.max_depth:
        raise MalformedTreeError(
            f"Replacement exceeds max depth {t.max_depth} "
            f"(slot depth {slot_depth} + donor depth {depth(donor_nodes)})"
        )
    return Tree(t.nodes[:start] + donor_nodes + t.nodes[end:], t.space)


def shape_key(t: Tree) -> Tuple[int, ...]:
    """Arity sequence; equal for trees with the same shape"""
    return tuple(node_arity(n) for n in t.nodes)


def validate(t: Tree) -> None:
    """Check every tree invariant, raising MalformedTreeError on the first violation"""
    nodes = t.nodes
    if not nodes:
        raise MalformedTreeError("Tree has no nodes")
    if isinstance(nodes[0], Window):
        raise MalformedTreeError("A window cannot be the root of a tree")

    pending = 1
    for i, node in enumerate(nodes):
        if pending == 0:
            raise MalformedTreeError(f"Node {i} is unreachable from the root")
        pending += node_arity(node) - 1
    if pending != 0:
        raise MalformedTreeError(f"Tree is incomplete: {pending} argument slot(s) left open")

    for i, node in enumerate(nodes):
        if isinstance(node, Function):
            if node.primitive not in t.space.primitives.all:
                raise MalformedTreeError(f"Primitive {node.primitive.id} is not in the primitive set")
            children = _children(nodes, i)
            if node.primitive.layer is Layer.MEZZANINE:
                if not isinstance(nodes[children[0]], Window):
                    raise MalformedTreeError(f"Mezzanine {node.primitive.id} at {i} needs a window child")
            elif any(isinstance(nodes[c], Window) for c in children):
                raise MalformedTreeError(f"Low level {node.primitive.id} at {i} has a window child")
        elif isinstance(node, Feature):
            if not 0 <= node.index < t.input_size:
                raise MalformedTreeError(f"Feature x{node.index} out of range for input size {t.input_size}")
        elif isinstance(node, Window):
            if node.length < 1 or node.start < 0 or node.start + node.length > t.input_size:
                raise MalformedTreeError(
                    f"Window {node.start}:{node.length} out of bounds for input size {t.input_size}"
                )
        elif isinstance(node, Constant):
            if not math.isfinite(node.value):
                raise MalformedTreeError(f"Constant at {i} is not finite")
        else:
            raise MalformedTreeError(f"Unknown node type {type(node).__name__}")
    if depth(t) > t.max_depth:
        raise MalformedTreeError(f"Tree depth {depth(t)} exceeds max depth {t.max_depth}")


def _children(nodes: Sequence[Node], index: int) -> List[int]:
    children = []
    cursor = index + 1
    for _ in range(node_arity(nodes[index])):
        children.append(cursor)
        cursor = subtree_span(nodes, cursor)[1]
    return children


# Random generation

def generate(rng: np.random.Generator, space: TreeSpace, method: Method,
             init_depth: Optional[int] = None) -> Tree:
    """Generate a random tree

    Args:
        rng: Random generator
        space: Primitive set, input size and depth bound
        method: GROW or FULL
        init_depth: Depth used for generation when smaller than the bound
            (ramped initialization); defaults to ``space.max_depth``

    Returns:
        A valid tree whose depth bound is ``space.max_depth``
    """
    budget = space.max_depth if init_depth is None else min(init_depth, space.max_depth)
    out: List[Node] = []
    _build(rng, space, budget, Method(method) is Method.FULL, out)
    return Tree(tuple(out), space)


def grow_subtree(rng: np.random.Generator, space: TreeSpace, budget: int, slot: SlotType) -> Tuple[Node, ...]:
    """A fresh Grow subtree for a slot of the given type with ``budget`` levels left"""
    if slot is SlotType.VECTOR:
        return (random_window(rng, space),)
    out: List[Node] = []
    _build(rng, space, budget, False, out)
    return tuple(out)


def ramped_half_and_half(rng: np.random.Generator, space: TreeSpace, n: int) -> List[Tree]:
    """Initial population: alternate Grow/Full over depths 2..max_depth"""
    low = min(2, space.max_depth)
    ramp = list(range(low, space.max_depth + 1)) or [space.max_depth]
    trees = []
    for i in range(n):
        method = Method.GROW if i % 2 == 0 else Method.FULL
        trees.append(generate(rng, space, method, init_depth=ramp[(i // 2) % len(ramp)]))
    return trees


def _build(rng: np.random.Generator, space: TreeSpace, budget: int, full: bool, out: List[Node]) -> None:
    primitives = space.primitives
    if budget > 0 and (full or rng.random() < 0.5):
        # Full trees only take a mezzanine where its window lands on the last level
        pool = primitives.low if full and budget > 1 else primitives.all
        p = pool[rng.integers(len(pool))]
        out.append(Function(p))
        if p.layer is Layer.MEZZANINE:
            out.append(random_window(rng, space))
        else:
            for _ in range(p.arity):
                _build(rng, space, budget - 1, full, out)
        return
    _random_terminal(rng, space, budget, out)


def _random_terminal(rng: np.random.Generator, space: TreeSpace, budget: int, out: List[Node]) -> None:
    reducers = space.primitives.mezz if budget >= 1 else ()
    choice = rng.integers(3 if reducers else 2)
    if choice == 0:
        out.append(Feature(int(rng.integers(space.input_size))))
    elif choice == 1:
        out.append(random_constant(rng, space))
    else:
        out.append(Function(reducers[rng.integers(len(reducers))]))
        out.append(random_window(rng, space))


def random_constant(rng: np.random.Generator, space: TreeSpace) -> Constant:
    lo, hi = space.const_range
    return Constant(float(rng.uniform(lo, hi)))


def random_window(rng: np.random.Generator, space: TreeSpace) -> Window:
    length = min(space.window_length or space.input_size, space.input_size)
    start = int(rng.integers(space.input_size - length + 1))
    return Window(start, length)


# Evaluation

def eval_reference(t: Tree, x: Sequence[float]) -> float:
    """Recursive post-order interpreter over a single sample"""
    value, _ = _eval_at(t.nodes, 0, x)
    return value


def _eval_at(nodes: Sequence[Node], index: int, x: Sequence[float]):
    node = nodes[index]
    if isinstance(node, Constant):
        return node.value, index + 1
    if isinstance(node, Feature):
        return float(x[node.index]), index + 1
    if isinstance(node, Window):
        return x[node.start:node.start + node.length], index + 1
    args = []
    cursor = index + 1
    for _ in range(node.arity):
        value, cursor = _eval_at(nodes, cursor, x)
        args.append(value)
    return apply(node.primitive, args), cursor


_FEATURE, _CONSTANT, _WINDOW, _CALL = range(4)


class LinearProgram:
    """Post-order instruction sequence evaluated with a value stack

    Each stack entry holds one value per sample, so a whole batch is
    evaluated in a single pass with vectorised primitives.
    """

    __slots__ = ("ops", "input_size")

    def __init__(self, ops: Tuple[tuple, ...], input_size: int):
        self.ops = ops
        self.input_size = input_size

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[np.newaxis, :]
        n = X.shape[0]
        stack: List[np.ndarray] = []
        with np.errstate(all="ignore"):
            for op, arg in self.ops:
                if op == _FEATURE:
                    stack.append(X[:, arg])
                elif op == _CONSTANT:
                    stack.append(np.full(n, arg))
                elif op == _WINDOW:
                    stack.append(X[:, arg[0]:arg[0] + arg[1]])
                else:
                    k = arg.arity
                    args = stack[-k:]
                    del stack[-k:]
                    stack.append(arg.vector(*args))
        return np.array(stack[0], dtype=float)


def compile(t: Tree) -> LinearProgram:
    ops: List[tuple] = []
    _emit(t.nodes, 0, ops)
    return LinearProgram(tuple(ops), t.input_size)


def _emit(nodes: Sequence[Node], index: int, ops: List[tuple]) -> int:
    node = nodes[index]
    if isinstance(node, Function):
        cursor = index + 1
        for _ in range(node.arity):
            cursor = _emit(nodes, cursor, ops)
        ops.append((_CALL, node.primitive))
        return cursor
    if isinstance(node, Feature):
        ops.append((_FEATURE, node.index))
    elif isinstance(node, Constant):
        ops.append((_CONSTANT, node.value))
    else:
        ops.append((_WINDOW, (node.start, node.length)))
    return index + 1


def eval_fast(program: LinearProgram, x: Sequence[float]) -> float:
    return float(program.evaluate(np.asarray(x, dtype=float))[0])


def predict(t: Tree, X: np.ndarray) -> np.ndarray:
    """Raw tree output for every row of X"""
    return compile(t).evaluate(X)


# Serialization

def to_string(t: Tree) -> str:
    parts: List[str] = []
    _render(t.nodes, 0, parts)
    return "".join(parts)


def _render(nodes: Sequence[Node], index: int, parts: List[str]) -> int:
    node = nodes[index]
    if isinstance(node, Function):
        parts.append(f"({node.primitive.id}")
        cursor = index + 1
        for _ in range(node.arity):
            parts.append(" ")
            cursor = _render(nodes, cursor, parts)
        parts.append(")")
        return cursor
    if isinstance(node, Feature):
        parts.append(f"x{node.index}")
    elif isinstance(node, Window):
        parts.append(f"v{node.start}:{node.length}")
    else:
        parts.append(format(node.value, ".17g"))
    return index + 1


_TOKEN = re.compile(r"\(|\)|[^\s()]+")
_FEATURE_TOKEN = re.compile(r"^x(\d+)$")
_WINDOW_TOKEN = re.compile(r"^v(\d+):(\d+)$")


def parse_tree(text: str, space: TreeSpace) -> Tree:
    """Parse the prefix text format back into a validated tree"""
    tokens = _TOKEN.findall(text)
    if not tokens:
        raise MalformedTreeError("Empty tree text")
    nodes: List[Node] = []
    cursor = _parse_at(tokens, 0, space, nodes)
    if cursor != len(tokens):
        raise MalformedTreeError(f"Unexpected trailing token '{tokens[cursor]}'")
    tree = Tree(tuple(nodes), space)
    validate(tree)
    return tree


def _parse_at(tokens: List[str], cursor: int, space: TreeSpace, nodes: List[Node]) -> int:
    if cursor >= len(tokens):
        raise MalformedTreeError("Unexpected end of tree text")
    token = tokens[cursor]
    if token == "(":
        if cursor + 1 >= len(tokens):
            raise MalformedTreeError("Unexpected end of tree text after '('")
        try:
            primitive = lookup(space.primitives, tokens[cursor + 1])
        except Exception as e:
            raise MalformedTreeError(str(e)) from e
        nodes.append(Function(primitive))
        cursor += 2
        args = 0
        while cursor < len(tokens) and tokens[cursor] != ")":
            cursor = _parse_at(tokens, cursor, space, nodes)
            args += 1
        if cursor >= len(tokens):
            raise MalformedTreeError(f"Missing ')' for {primitive.id}")
        if args != primitive.arity:
            raise MalformedTreeError(f"{primitive.id} expects {primitive.arity} argument(s), got {args}")
        return cursor + 1
    if token == ")":
        raise MalformedTreeError("Unexpected ')'")
    feature = _FEATURE_TOKEN.match(token)
    if feature:
        nodes.append(Feature(int(feature.group(1))))
        return cursor + 1
    window = _WINDOW_TOKEN.match(token)
    if window:
        nodes.append(Window(int(window.group(1)), int(window.group(2))))
        return cursor + 1
    try:
        value = float(token)
    except ValueError:
        raise MalformedTreeError(f"Unrecognised token '{token}'") from None
    nodes.append(Constant(value))
    return cursor + 1
