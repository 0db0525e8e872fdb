"""Shared geometric value types, shape normalization and the seeding contract."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, TypeVar

import numpy as np

DEFAULT_SEED = 20110813
BLOCK_SIZE = 1 << 16
THREADS_ENV = "SUBDIVLAB_THREADS"

SQRT3_2 = math.sqrt(3.0) / 2.0
_SLACK = 1e-12

T = TypeVar("T")


class Vec2(NamedTuple):
    x: float
    y: float

    def __add__(self, other):  # type: ignore[override]
        return Vec2(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return Vec2(self.x - other[0], self.y - other[1])

    def __mul__(self, k):  # type: ignore[override]
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


@dataclass(frozen=True)
class AngleTriple:
    """Triangle angles as fractions of the straight angle, so a + b + c = 1."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if min(self.a, self.b, self.c) < -_SLACK:
            raise ValueError(f"negative angle in {self}")
        if abs(self.a + self.b + self.c - 1.0) > _SLACK:
            raise ValueError(f"angles of {self} do not sum to 1")

    @classmethod
    def of(cls, a: float, b: float, c: float) -> "AngleTriple":
        """Clip tiny negatives and renormalize onto the simplex."""
        a, b, c = max(a, 0.0), max(b, 0.0), max(c, 0.0)
        s = a + b + c
        if s <= 0:
            raise ValueError("cannot normalize a zero triple")
        return cls(a / s, b / s, c / s)

    @classmethod
    def from_array(cls, v) -> "AngleTriple":
        return cls.of(float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c])

    def radians(self) -> tuple[float, float, float]:
        return (self.a * math.pi, self.b * math.pi, self.c * math.pi)


EQUILATERAL_ANGLES = AngleTriple(1 / 3, 1 / 3, 1 / 3)


@dataclass(frozen=True)
class ShapeCoord:
    """Apex (x, y) of a triangle whose longest side is the unit segment [0, 1]."""

    x: float
    y: float

    def __post_init__(self):
        if not (0.5 - _SLACK <= self.x <= 1.0 + _SLACK):
            raise ValueError(f"x={self.x!r} outside [1/2, 1]")
        if not (-_SLACK <= self.y <= SQRT3_2 + _SLACK):
            raise ValueError(f"y={self.y!r} outside [0, sqrt(3)/2]")
        # clamp rounding slack so the stored value honours the invariant exactly
        object.__setattr__(self, "x", min(max(float(self.x), 0.5), 1.0))
        object.__setattr__(self, "y", min(max(float(self.y), 0.0), SQRT3_2))


EQUILATERAL = ShapeCoord(0.5, SQRT3_2)


@dataclass(frozen=True)
class UniformTriple:
    xi_a: float
    xi_b: float
    xi_c: float

    def __post_init__(self):
        for v in (self.xi_a, self.xi_b, self.xi_c):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"uniform component {v!r} outside [0, 1]")


@dataclass(frozen=True)
class Quadrilateral:
    A: Vec2
    B: Vec2
    C: Vec2
    D: Vec2

    def vertices(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C, self.D], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Quadrilateral":
        arr = np.asarray(arr, dtype=float)
        return cls(*(Vec2(float(p[0]), float(p[1])) for p in arr))

    def signed_area(self) -> float:
        v = self.vertices()
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def is_convex(self) -> bool:
        v = self.vertices()
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        return bool(np.all(cross > 0) or np.all(cross < 0))

    def perimeter(self) -> float:
        v = self.vertices()
        return float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))


class RandomSource:
    """Deterministic random stream identified by ``(seed, stream_index)``.

    Backed by the counter-based Philox generator keyed through a
    ``SeedSequence`` spawn key, so distinct stream indices are independent
    and no stream depends on how many draws another stream made.
    """

    def __init__(self, seed: int = DEFAULT_SEED, stream_index: int = 0, _path: tuple[int, ...] = ()):
        if not (0 <= seed < 2**64 and 0 <= stream_index < 2**64):
            raise ValueError("seed and stream_index must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        self._path = tuple(_path)
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, *self._path))
        self.generator = np.random.Generator(np.random.Philox(seq))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream_index={self.stream_index}, path={self._path})"

    def child(self, index: int) -> "RandomSource":
        """Independent sub-stream; a pure function of this stream's identity and ``index``."""
        return RandomSource(self.seed, self.stream_index, (*self._path, int(index)))

    def uniform(self, size=None):
        return self.generator.random(size)

    def integers(self, high: int, size=None):
        return self.generator.integers(0, high, size=size)


def next_uniform(src: RandomSource) -> float:
    return float(src.uniform())


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, int(threads))


def replica_blocks(n_replicas: int, block_size: int = BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """Fixed partition of replicas into ``(block_index, start, count)`` triples."""
    if n_replicas < 1:
        raise ValueError("need at least one replica")
    return [(b, s, min(block_size, n_replicas - s)) for b, s in enumerate(range(0, n_replicas, block_size))]


def map_replica_blocks(
    fn: Callable[[RandomSource, int], T],
    n_replicas: int,
    src: RandomSource,
    threads: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> list[T]:
    """Run ``fn(block_source, count)`` over replica blocks; results come back in block order.

    Block ``b`` always draws from ``src.child(b)``, so the output does not
    depend on the number of worker threads or on scheduling.
    """
    blocks = replica_blocks(n_replicas, block_size)
    work = [(src.child(b), count) for b, _, count in blocks]
    nthreads = resolve_threads(threads)
    if nthreads == 1 or len(work) == 1:
        return [fn(s, c) for s, c in work]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(lambda sc: fn(*sc), work))


def simplex_distance(u: AngleTriple, v: AngleTriple) -> float:
    return math.sqrt((u.a - v.a) ** 2 + (u.b - v.b) ** 2 + (u.c - v.c) ** 2)


def shape_from_vertices_many(A, B, C) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized shape normalization for arrays of vertices with shape ``(..., 2)``.

    Every side whose squared length is within a relative 1e-12 of the maximum
    is a candidate base; the lexicographically smallest folded ``(x, y)``
    among candidates wins.
    """
    A, B, C = (np.asarray(p, dtype=float) for p in (A, B, C))
    xs, ys, l2s = [], [], []
    for p, q, r in ((A, B, C), (B, C, A), (C, A, B)):
        d = q - p
        w = r - p
        l2 = d[..., 0] ** 2 + d[..., 1] ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            t = (w[..., 0] * d[..., 0] + w[..., 1] * d[..., 1]) / l2
            h = np.abs(d[..., 0] * w[..., 1] - d[..., 1] * w[..., 0]) / l2
        xs.append(np.maximum(t, 1.0 - t))
        ys.append(h)
        l2s.append(l2)
    xs, ys, l2s = np.stack(xs), np.stack(ys), np.stack(l2s)
    longest = l2s.max(axis=0)
    if np.any(longest == 0):
        raise ValueError("null triangle")
    candidate = l2s >= longest * (1.0 - _SLACK)
    xk = np.where(candidate, xs, np.inf)
    xbest = xk.min(axis=0)
    yk = np.where(candidate & (xk == xbest), ys, np.inf)
    ybest = yk.min(axis=0)
    return np.clip(xbest, 0.5, 1.0), np.clip(ybest, 0.0, SQRT3_2)


def shape_from_vertices(A: Sequence[float], B: Sequence[float], C: Sequence[float]) -> ShapeCoord:
    x, y = shape_from_vertices_many(A, B, C)
    return ShapeCoord(float(x), float(y))
