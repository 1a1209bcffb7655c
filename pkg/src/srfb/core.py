"""Strategy profiles, compact convex feasible sets and the relaxation step."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import kernels

__all__ = [
    "ContractError",
    "ParameterError",
    "StrategyProfile",
    "Box",
    "Ball",
    "Product",
    "FeasibleSet",
    "project",
    "diameter",
    "relax_combine",
    "as_vector",
]

TOL = 1e-10


class ContractError(ValueError):
    """A caller broke a precondition (dimension mismatch, bad shape)."""


class ParameterError(ValueError):
    """A numeric parameter lies outside its admissible range."""


def _finite_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} must be finite")
    return arr


class StrategyProfile:
    """Joint decision vector ``col(x_1, ..., x_N)`` split into player blocks.

    The flat vector is stored read-only; ``blocks`` returns views into it.
    """

    __slots__ = ("_vec", "_sizes")

    def __init__(self, vector, sizes: Sequence[int] | None = None):
        vec = _finite_vector(vector, "strategy profile")
        if vec.size < 1:
            raise ContractError("strategy profile needs at least one entry")
        sizes = (vec.size,) if sizes is None else tuple(int(s) for s in sizes)
        if any(s < 1 for s in sizes) or sum(sizes) != vec.size:
            raise ContractError(f"block sizes {sizes} do not sum to {vec.size}")
        vec.setflags(write=False)
        self._vec = vec
        self._sizes = sizes

    @classmethod
    def from_blocks(cls, blocks: Sequence) -> "StrategyProfile":
        parts = [np.atleast_1d(np.asarray(b, dtype=float)).reshape(-1) for b in blocks]
        return cls(np.concatenate(parts), [p.size for p in parts])

    @property
    def vector(self) -> np.ndarray:
        return self._vec

    @property
    def sizes(self) -> tuple:
        return self._sizes

    @property
    def total_dim(self) -> int:
        return self._vec.size

    @property
    def blocks(self) -> list:
        return np.split(self._vec, np.cumsum(self._sizes)[:-1])

    def with_vector(self, vector) -> "StrategyProfile":
        return StrategyProfile(vector, self._sizes)

    def __array__(self, dtype=None, copy=None):
        return self._vec if dtype is None else self._vec.astype(dtype)

    def __len__(self):
        return self._vec.size

    def __eq__(self, other):
        if not isinstance(other, StrategyProfile):
            return NotImplemented
        return self._sizes == other._sizes and np.array_equal(self._vec, other._vec)

    def __repr__(self):
        return f"StrategyProfile({self._vec.tolist()}, sizes={list(self._sizes)})"


def as_vector(x) -> np.ndarray:
    if isinstance(x, StrategyProfile):
        return x.vector
    return np.asarray(x, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _finite_vector(self.lower, "box lower bound")
        hi = _finite_vector(self.upper, "box upper bound")
        if lo.shape != hi.shape:
            raise ContractError("box bounds have different lengths")
        if np.any(lo > hi):
            raise ParameterError("box needs lower <= upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    def project(self, x: np.ndarray) -> np.ndarray:
        return kernels.clip_box(x, self.lower, self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def bounding_box(self):
        return self.lower, self.upper

    def contains(self, x, tol: float = TOL) -> bool:
        x = as_vector(x)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def to_dict(self) -> dict:
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class Ball:
    center_point: np.ndarray
    radius: float

    def __post_init__(self):
        c = _finite_vector(self.center_point, "ball center")
        r = float(self.radius)
        if not (np.isfinite(r) and r > 0):
            raise ParameterError("ball radius must be positive and finite")
        c.setflags(write=False)
        object.__setattr__(self, "center_point", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return self.center_point.size

    def project(self, x: np.ndarray) -> np.ndarray:
        return kernels.project_ball(x, self.center_point, self.radius)

    def diameter(self) -> float:
        return 2.0 * self.radius

    def center(self) -> np.ndarray:
        return self.center_point.copy()

    def bounding_box(self):
        return self.center_point - self.radius, self.center_point + self.radius

    def contains(self, x, tol: float = TOL) -> bool:
        return bool(np.linalg.norm(as_vector(x) - self.center_point) <= self.radius + tol)

    def to_dict(self) -> dict:
        return {"type": "ball", "center": self.center_point.tolist(), "radius": self.radius}


@dataclass(frozen=True, eq=False)
class Product:
    """Cartesian product of per-player sets, in block order."""

    members: tuple = field(default_factory=tuple)

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ContractError("product set needs at least one member")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "_cuts", np.cumsum([m.dim for m in members])[:-1])

    @property
    def dim(self) -> int:
        return sum(m.dim for m in self.members)

    @property
    def sizes(self) -> tuple:
        return tuple(m.dim for m in self.members)

    def _split(self, x):
        return np.split(x, self._cuts)

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.concatenate([m.project(p) for m, p in zip(self.members, self._split(x))])

    def diameter(self) -> float:
        return float(np.sqrt(sum(m.diameter() ** 2 for m in self.members)))

    def center(self) -> np.ndarray:
        return np.concatenate([m.center() for m in self.members])

    def bounding_box(self):
        lo, hi = zip(*(m.bounding_box() for m in self.members))
        return np.concatenate(lo), np.concatenate(hi)

    def contains(self, x, tol: float = TOL) -> bool:
        return all(m.contains(p, tol) for m, p in zip(self.members, self._split(as_vector(x))))

    def to_dict(self) -> dict:
        return {"type": "product", "members": [m.to_dict() for m in self.members]}


FeasibleSet = Union[Box, Ball, Product]


def set_from_dict(spec: dict) -> FeasibleSet:
    kind = spec["type"]
    if kind == "box":
        return Box(spec["lower"], spec["upper"])
    if kind == "ball":
        return Ball(spec["center"], spec["radius"])
    if kind == "product":
        return Product(tuple(set_from_dict(m) for m in spec["members"]))
    raise ContractError(f"unknown set type {kind!r}")


def _check_dim(feasible_set, x: np.ndarray):
    if x.size != feasible_set.dim:
        raise ContractError(f"dimension mismatch: point has {x.size} entries, set has {feasible_set.dim}")


def project(feasible_set: FeasibleSet, x):
    """Euclidean projection of ``x`` onto the set.

    Returns a :class:`StrategyProfile` when given one, a flat array otherwise.
    """
    v = as_vector(x)
    _check_dim(feasible_set, v)
    out = feasible_set.project(np.ascontiguousarray(v))
    if isinstance(x, StrategyProfile):
        return x.with_vector(out)
    return out


def diameter(feasible_set: FeasibleSet) -> float:
    """Largest distance between two points of the set."""
    return feasible_set.diameter()


def relax_combine(x, x_bar_prev, delta: float):
    """Convex combination ``(1 - delta) * x + delta * x_bar_prev``."""
    delta = float(delta)
    if not 0.0 <= delta <= 1.0:
        raise ParameterError(f"relaxation delta={delta} outside [0, 1]")
    a, b = as_vector(x), as_vector(x_bar_prev)
    if a.shape != b.shape:
        raise ContractError("relax_combine operands differ in dimension")
    out = kernels.relax(np.ascontiguousarray(a), np.ascontiguousarray(b), delta)
    if isinstance(x, StrategyProfile):
        return x.with_vector(out)
    return out
