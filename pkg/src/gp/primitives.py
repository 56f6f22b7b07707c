"""Primitive registry: scalar (low level) and vector-to-scalar (mezzanine) functions

Every primitive has two implementations that must agree bit for bit:

- ``scalar``: operates on Python floats, used by the reference interpreter.
- ``vector``: operates on numpy arrays (one value per sample), used by the
  compiled evaluator. Mezzanine vector implementations receive a 2-D array
  with one window per row.

All outputs are clamped to ``[-VALUE_BOUND, VALUE_BOUND]`` so that no
composition of primitives can overflow into inf or NaN.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, MalformedTreeError

VALUE_BOUND = 1e150
DIV_EPSILON = 1e-9


class Layer(str, Enum):
    """Abstraction layer of a primitive"""
    LOW_LEVEL = "low"
    MEZZANINE = "mezzanine"


@dataclass(frozen=True)
class PrimitiveSignature:
    """A named function node type"""
    id: str
    layer: Layer
    arity: int
    scalar: Callable = None
    vector: Callable = None

    def __repr__(self) -> str:
        return f"PrimitiveSignature({self.id}, {self.layer.value}, arity={self.arity})"


def _clamp(value: float) -> float:
    if value > VALUE_BOUND:
        return VALUE_BOUND
    if value < -VALUE_BOUND:
        return -VALUE_BOUND
    return value


def _clip(values: np.ndarray) -> np.ndarray:
    return np.clip(values, -VALUE_BOUND, VALUE_BOUND)


# Low level, scalar form

def _add(a: float, b: float) -> float:
    return _clamp(a + b)


def _sub(a: float, b: float) -> float:
    return _clamp(a - b)


def _mul(a: float, b: float) -> float:
    return _clamp(a * b)


def _div(a: float, b: float) -> float:
    """Protected division: 1.0 when the denominator is (near) zero"""
    if abs(b) < DIV_EPSILON:
        return 1.0
    return _clamp(a / b)


def _relu(a: float) -> float:
    return a if a > 0.0 else 0.0


def _max(a: float, b: float) -> float:
    return a if a >= b else b


def _min(a: float, b: float) -> float:
    return a if a <= b else b


def _mean(a: float, b: float) -> float:
    return _clamp((a + b) / 2.0)


def _x2(a: float) -> float:
    return _clamp(a * a)


def _sqrt(a: float) -> float:
    """Protected square root of the absolute value"""
    return math.sqrt(abs(a))


# Low level, vectorised form

def _add_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _clip(a + b)


def _sub_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _clip(a - b)


def _mul_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _clip(a * b)


def _div_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.ones(np.broadcast(a, b).shape)
    np.divide(a, b, out=out, where=np.abs(b) >= DIV_EPSILON)
    return _clip(out)


def _relu_v(a: np.ndarray) -> np.ndarray:
    return np.where(a > 0.0, a, 0.0)


def _max_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a >= b, a, b)


def _min_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.where(a <= b, a, b)


def _mean_v(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _clip((a + b) / 2.0)


def _x2_v(a: np.ndarray) -> np.ndarray:
    return _clip(a * a)


def _sqrt_v(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.abs(a))


# Mezzanine: one window in, one scalar out.
# Window values are clamped before reduction; fsum of clamped values cannot
# overflow and is exactly rounded, so row-wise and single-vector evaluation
# give identical bits.

def _vmean(v: Sequence[float]) -> float:
    return _clamp(math.fsum(_clamp(x) for x in v) / len(v))


def _vmin(v: Sequence[float]) -> float:
    return _clamp(float(min(v)))


def _vmax(v: Sequence[float]) -> float:
    return _clamp(float(max(v)))


def _vmean_v(windows: np.ndarray) -> np.ndarray:
    sums = np.array([math.fsum(row) for row in _clip(windows)], dtype=float)
    return _clip(sums / windows.shape[1])


def _vmin_v(windows: np.ndarray) -> np.ndarray:
    return _clip(windows.min(axis=1))


def _vmax_v(windows: np.ndarray) -> np.ndarray:
    return _clip(windows.max(axis=1))


def _low(id: str, arity: int, scalar: Callable, vector: Callable) -> PrimitiveSignature:
    return PrimitiveSignature(id, Layer.LOW_LEVEL, arity, scalar, vector)


def _mezz(id: str, scalar: Callable, vector: Callable) -> PrimitiveSignature:
    return PrimitiveSignature(id, Layer.MEZZANINE, 1, scalar, vector)


REGISTRY: Dict[str, PrimitiveSignature] = {
    p.id: p for p in (
        _low("ADD", 2, _add, _add_v),
        _low("SUB", 2, _sub, _sub_v),
        _low("MUL", 2, _mul, _mul_v),
        _low("DIV", 2, _div, _div_v),
        _low("RELU", 1, _relu, _relu_v),
        _low("MAX", 2, _max, _max_v),
        _low("MIN", 2, _min, _min_v),
        _low("MEAN", 2, _mean, _mean_v),
        _low("X2", 1, _x2, _x2_v),
        _low("SQRT", 1, _sqrt, _sqrt_v),
        _mezz("VMEAN", _vmean, _vmean_v),
        _mezz("VMIN", _vmin, _vmin_v),
        _mezz("VMAX", _vmax, _vmax_v),
    )
}

DEFAULT_LOWLEVEL = ("ADD", "SUB", "MUL", "DIV", "RELU", "MAX", "MIN", "MEAN", "X2", "SQRT")
DEFAULT_MEZZANINE = ("VMEAN", "VMIN", "VMAX")


@dataclass(frozen=True)
class PrimitiveSet:
    """Immutable set of primitives available to trees"""
    low: Tuple[PrimitiveSignature, ...]
    mezz: Tuple[PrimitiveSignature, ...] = ()

    def __post_init__(self):
        ids = [p.id for p in self.low + self.mezz]
        if len(ids) != len(set(ids)):
            raise ConfigError(f"Primitive ids must be unique, got {ids}")
        if not self.low:
            raise ConfigError("At least one low level primitive is required")
        for p in self.low:
            if p.layer is not Layer.LOW_LEVEL:
                raise ConfigError(f"{p.id} is not a low level primitive")
        for p in self.mezz:
            if p.layer is not Layer.MEZZANINE:
                raise ConfigError(f"{p.id} is not a mezzanine primitive")

    @classmethod
    def from_ids(cls, lowlevel: Iterable[str], mezzanine: Optional[Iterable[str]] = None) -> "PrimitiveSet":
        """Build a set from registry ids, as declared in an experiment config"""
        low = tuple(lookup_id(name) for name in lowlevel)
        mezz = tuple(lookup_id(name) for name in (mezzanine or ()))
        return cls(low=low, mezz=mezz)

    @classmethod
    def default(cls, with_mezzanine: bool = True) -> "PrimitiveSet":
        return cls.from_ids(DEFAULT_LOWLEVEL, DEFAULT_MEZZANINE if with_mezzanine else ())

    @property
    def all(self) -> Tuple[PrimitiveSignature, ...]:
        return self.low + self.mezz

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(p.id for p in self.all)

    def same_kind(self, p: PrimitiveSignature) -> Tuple[PrimitiveSignature, ...]:
        """Primitives of the same layer and arity as ``p``, excluding ``p``"""
        pool = self.low if p.layer is Layer.LOW_LEVEL else self.mezz
        return tuple(q for q in pool if q.arity == p.arity and q.id != p.id)


def lookup_id(id: str) -> PrimitiveSignature:
    """Resolve an id against the compiled-in registry"""
    try:
        return REGISTRY[id]
    except KeyError:
        raise ConfigError(
            f"Unknown primitive id '{id}'. Known ids: {', '.join(REGISTRY)}"
        ) from None


def lookup(primitives: PrimitiveSet, id: str) -> PrimitiveSignature:
    """Resolve an id within a primitive set"""
    for p in primitives.all:
        if p.id == id:
            return p
    raise ConfigError(
        f"Primitive '{id}' is not part of this primitive set ({', '.join(primitives.ids)})"
    )


def apply(p: PrimitiveSignature, args: Sequence) -> float:
    """Evaluate a primitive on scalar arguments (or one vector for mezzanine)"""
    if p.layer is Layer.MEZZANINE:
        if len(args) != 1:
            raise MalformedTreeError(f"{p.id} takes exactly one vector argument, got {len(args)}")
        vector = args[0]
        if len(vector) == 0:
            raise MalformedTreeError(f"{p.id} received an empty vector")
        return p.scalar([float(v) for v in vector])
    if len(args) != p.arity:
        raise MalformedTreeError(f"{p.id} expects {p.arity} argument(s), got {len(args)}")
    return p.scalar(*(float(a) for a in args))
