"""Angle-bisector subdivision of a triangle, as a random walk on the angle simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    EQUILATERAL_ANGLES,
    AngleTriple,
    RandomSource,
    map_replica_blocks,
    simplex_distance,
)
from .stats import StreamingMoments, merge_all

CONTRACTION_BOUND = math.log(math.sqrt(3.0) / 2.0)
PAIR_BOUND = math.log(3.0 / 4.0)

# sigma((a, b, c)) in the order (a,b,c), (b,c,a), (c,a,b), (c,b,a), (b,a,c), (a,c,b)
PERMUTATIONS = np.array([[0, 1, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0], [1, 0, 2], [0, 2, 1]])


def children_many(t: np.ndarray) -> np.ndarray:
    """All six child triples for an ``(n, 3)`` array; returns shape ``(n, 6, 3)``."""
    t = np.asarray(t, dtype=float)
    a, b, c = t[..., 0], t[..., 1], t[..., 2]
    out = np.stack([
        np.stack([a / 2, c + b / 2, (a + b) / 2], axis=-1),
        np.stack([a / 2, b + c / 2, (a + c) / 2], axis=-1),
        np.stack([b / 2, a + c / 2, (b + c) / 2], axis=-1),
        np.stack([b / 2, c + a / 2, (a + b) / 2], axis=-1),
        np.stack([c / 2, b + a / 2, (a + c) / 2], axis=-1),
        np.stack([c / 2, a + b / 2, (b + c) / 2], axis=-1),
    ], axis=-2)
    return out


def bisector_children(t: AngleTriple) -> list[AngleTriple]:
    return [AngleTriple.from_array(row) for row in children_many(t.as_array())]


def _renormalize(t: np.ndarray) -> np.ndarray:
    t = np.maximum(t, 0.0)
    return t / t.sum(axis=-1, keepdims=True)


def base_map(t: np.ndarray) -> np.ndarray:
    a, b, c = t[..., 0], t[..., 1], t[..., 2]
    return np.stack([a / 2, c + b / 2, (a + b) / 2], axis=-1)


def permutation_step_many(t: np.ndarray, perm_index: np.ndarray) -> np.ndarray:
    return _renormalize(np.take_along_axis(base_map(t), PERMUTATIONS[perm_index], axis=-1))


def child_step_many(t: np.ndarray, child: np.ndarray) -> np.ndarray:
    kids = children_many(t)
    return _renormalize(kids[np.arange(len(t)), child])


def bisector_step_permutation(t: AngleTriple, src: RandomSource) -> AngleTriple:
    k = int(src.integers(6))
    return AngleTriple.from_array(permutation_step_many(t.as_array()[None, :], np.array([k]))[0])


def bisector_step_child(t: AngleTriple, src: RandomSource) -> AngleTriple:
    return bisector_children(t)[int(src.integers(6))]


def pairwise_log_ratios(u: AngleTriple, v: AngleTriple) -> np.ndarray:
    """``log(|f_i(u) - f_i(v)| / |u - v|)`` for the six maps."""
    d = simplex_distance(u, v)
    if d == 0:
        raise ValueError("zero displacement")
    diff = children_many(u.as_array()) - children_many(v.as_array())
    return np.log(np.linalg.norm(diff, axis=-1) / d)


def pairwise_contraction(u: AngleTriple, v: AngleTriple) -> float:
    """Average log Lipschitz ratio over the six maps; never above log(sqrt(3)/2)."""
    return float(pairwise_log_ratios(u, v).mean())


def pair_sum_ratio(y, z):
    """Closed-form sum of the log ratios of maps 1 and 2 for displacement ``(-y-z, y, z)``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    num = (y * y + 3 * z * z + 3 * y * z) * (3 * y * y + z * z + 3 * y * z)
    return 0.5 * np.log(num / (16.0 * (y * y + z * z + y * z) ** 2))


def simulate(
    n_steps: int,
    n_replicas: int,
    src: RandomSource,
    dynamics: str = "permutation",
    start: AngleTriple = EQUILATERAL_ANGLES,
    threads: int | None = None,
) -> np.ndarray:
    """Final triples of independent chains, shape ``(n_replicas, 3)``."""
    if n_steps < 1 or n_replicas < 1:
        raise ValueError("n_steps and n_replicas must be >= 1")
    if dynamics not in ("permutation", "child"):
        raise ValueError(f"unknown dynamics {dynamics!r}")
    step = permutation_step_many if dynamics == "permutation" else child_step_many

    def block(bsrc: RandomSource, count: int) -> np.ndarray:
        t = np.tile(start.as_array(), (count, 1))
        for _ in range(n_steps):
            t = step(t, bsrc.integers(6, size=count))
        return t

    return np.concatenate(map_replica_blocks(block, n_replicas, src, threads))


@dataclass(frozen=True)
class BisectorMoments:
    mean_a: float
    second_a: float
    cross_ab: float
    var_a: float
    cov_ab: float
    n_samples: int
    stderr_mean: float
    stderr_second: float = float("nan")
    stderr_cross: float = float("nan")

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("no samples")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _block_accumulators(t: np.ndarray) -> tuple[StreamingMoments, StreamingMoments]:
    # pooled (first, second) component pairs over the three cyclic rotations
    pooled = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    sq = (t * t).mean(axis=1)
    cr = (t[:, 0] * t[:, 1] + t[:, 1] * t[:, 2] + t[:, 2] * t[:, 0]) / 3
    per_sample = np.stack([t[:, 0], sq, cr], axis=1)
    return StreamingMoments.of(pooled), StreamingMoments.of(per_sample)


def moments_from_samples(samples: np.ndarray, block_size: int = 1 << 16) -> BisectorMoments:
    """Exchangeable moments of simplex samples, reduced block by block."""
    samples = np.asarray(samples, dtype=float)
    parts = [_block_accumulators(samples[i:i + block_size]) for i in range(0, len(samples), block_size)]
    pooled = merge_all(p[0] for p in parts)
    per = merge_all(p[1] for p in parts)
    mean = float(pooled.mean[0])
    cov = pooled.covariance()
    second = float(cov[0, 0] + mean * mean)
    cross = float(cov[0, 1] + pooled.mean[0] * pooled.mean[1])
    se = per.stderr()
    return BisectorMoments(
        mean_a=mean,
        second_a=second,
        cross_ab=cross,
        var_a=second - mean * mean,
        cov_ab=cross - mean * mean,
        n_samples=per.count,
        stderr_mean=float(se[0]),
        stderr_second=float(se[1]),
        stderr_cross=float(se[2]),
    )


def estimate_moments(
    n_steps: int,
    n_replicas: int,
    src: RandomSource,
    threads: int | None = None,
    dynamics: str = "permutation",
) -> BisectorMoments:
    return moments_from_samples(simulate(n_steps, n_replicas, src, dynamics, threads=threads))


def closure_residual(m: BisectorMoments) -> tuple[float, float]:
    """Residual of the stationary second-moment relation and its standard error.

    Stationarity of the permutation dynamics forces
    ``E a^2 = (1/3) [E a^2 / 4 + E (c + b/2)^2 + E (a + b)^2 / 4]``, which by
    exchangeability reads ``E a^2 = (2 E a^2 + 1.5 E ab) / 3``.
    """
    resid = m.second_a - (2 * m.second_a + 1.5 * m.cross_ab) / 3
    # per sample 3*second + 6*cross = 1, so the residual is (7 second - 1) / 12
    return resid, 7.0 / 12.0 * m.stderr_second


@dataclass(frozen=True)
class TernaryHistogram:
    resolution: int
    counts: np.ndarray
    total: int

    def cells(self):
        k = self.resolution
        for i in range(k + 1):
            for j in range(k + 1 - i):
                yield i, j, int(self.counts[i, j])


@dataclass(frozen=True)
class AngleHistogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def mean(self) -> float:
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        return float(centers @ self.counts / self.counts.sum())

    def rows(self):
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            yield float(lo), float(hi), int(c)


def build_ternary_histogram(samples, resolution: int) -> TernaryHistogram:
    """Count samples in barycentric cells ``(i, j) = (floor(k a), floor(k b))``, ``i + j <= k``."""
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    s = np.asarray(samples, dtype=float).reshape(-1, 3)
    k = resolution
    i = np.clip(np.floor(s[:, 0] * k).astype(int), 0, k)
    j = np.clip(np.floor(s[:, 1] * k).astype(int), 0, k)
    j = np.minimum(j, k - i)
    counts = np.zeros((k + 1, k + 1), dtype=np.int64)
    np.add.at(counts, (i, j), 1)
    return TernaryHistogram(k, counts, len(s))


def build_angle_histogram(samples, bins: int) -> AngleHistogram:
    """Histogram on [0, 1] of all three angles of every sample pooled together."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    s = np.asarray(samples, dtype=float).reshape(-1, 3).ravel()
    counts, edges = np.histogram(s, bins=bins, range=(0.0, 1.0))
    return AngleHistogram(edges, counts)


def atom_scan(values, resolution: float = 1e-9) -> dict:
    """Heuristic check for atoms: largest multiplicity after rounding to ``resolution``.

    For a continuous law with bounded density the number of coinciding pairs
    is about ``n**2 * resolution * integral(density**2) / 2`` and triples are rare, so a
    value repeated many times points at an atom. Simulation cannot prove the
    absence of atoms; this only screens for gross ones.
    """
    v = np.round(np.asarray(values, dtype=float) / resolution).astype(np.int64)
    _, counts = np.unique(v, return_counts=True)
    n = len(v)
    hist, _ = np.histogram(values, bins=200, range=(0.0, 1.0), density=True)
    expected_pairs = n * n * resolution * float(np.mean(hist * hist)) / 2
    largest = int(counts.max())
    return {
        "n": n,
        "largest_multiplicity": largest,
        "coinciding_pairs": int(np.sum(counts * (counts - 1) // 2)),
        "expected_pairs_continuous": expected_pairs,
        "atom_suspected": largest >= 10,
    }
