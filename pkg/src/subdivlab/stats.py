"""Streaming moments, Kolmogorov-Smirnov tests, slope fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class StreamingMoments:
    """Count, mean vector and co-moment matrix of d-dimensional observations.

    ``m2[i, j]`` is the sum of products of deviations from the mean, so the
    diagonal holds the sums of squared deviations. Batches are reduced with
    the pairwise (Chan et al.) update, which makes :func:`merge` associative
    up to rounding.
    """

    dim: int = 1
    count: int = 0
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    m2: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros((self.dim, self.dim))

    @classmethod
    def of(cls, data) -> "StreamingMoments":
        data = np.asarray(data, dtype=float)
        if data.ndim == 1:
            data = data[:, None]
        acc = cls(dim=data.shape[1])
        if len(data):
            mean = data.mean(axis=0)
            dev = data - mean
            acc.count, acc.mean, acc.m2 = len(data), mean, dev.T @ dev
        return acc

    def update(self, data) -> "StreamingMoments":
        other = StreamingMoments.of(data)
        merged = merge(self, other)
        self.count, self.mean, self.m2 = merged.count, merged.mean, merged.m2
        return self

    def variance(self, ddof: int = 0) -> np.ndarray:
        return np.diag(self.m2) / (self.count - ddof)

    def covariance(self, ddof: int = 0) -> np.ndarray:
        return self.m2 / (self.count - ddof)

    def stderr(self) -> np.ndarray:
        """Standard error of the mean of each coordinate."""
        return np.sqrt(self.variance(ddof=1) / self.count)


def merge(a: StreamingMoments, b: StreamingMoments) -> StreamingMoments:
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.count == 0:
        return StreamingMoments(b.dim, b.count, b.mean.copy(), b.m2.copy())
    if b.count == 0:
        return StreamingMoments(a.dim, a.count, a.mean.copy(), a.m2.copy())
    n = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / n)
    m2 = a.m2 + b.m2 + np.outer(delta, delta) * (a.count * b.count / n)
    return StreamingMoments(a.dim, n, mean, m2)


def merge_all(parts) -> StreamingMoments:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = merge(out, p)
    return out


@dataclass(frozen=True)
class KsReport:
    d_statistic: float
    n: int
    p_value: float


def kolmogorov_sf(lam: float, term_tol: float = 1e-10) -> float:
    """Survival function of the Kolmogorov distribution, P(K > lam)."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form converges fast for small arguments
        s, k = 0.0, 1
        c = math.pi**2 / (8.0 * lam * lam)
        while True:
            t = math.exp(-(2 * k - 1) ** 2 * c)
            s += t
            if t < term_tol:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / lam * s))
    s, k, sign = 0.0, 1, 1.0
    while True:
        t = math.exp(-2.0 * k * k * lam * lam)
        s += sign * t
        if t < term_tol:
            break
        sign, k = -sign, k + 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> KsReport:
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    if n < 10:
        raise ValueError("KS test needs at least 10 samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return KsReport(d, n, kolmogorov_sf(math.sqrt(n) * d))


def ks_2samp(x, y) -> KsReport:
    """Two-sample KS test with the asymptotic p-value; ``n`` is the effective size."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if len(x) == 0 or len(y) == 0:
        raise ValueError("empty sample")
    grid = np.concatenate([x, y])
    d = float(np.max(np.abs(np.searchsorted(x, grid, "right") / len(x) - np.searchsorted(y, grid, "right") / len(y))))
    ne = len(x) * len(y) / (len(x) + len(y))
    return KsReport(d, int(round(ne)), kolmogorov_sf(math.sqrt(ne) * d))


def ks_critical_value(n: float, alpha: float = 0.01) -> float:
    """Asymptotic critical D for sample size ``n`` (1.63/sqrt(n) at alpha = 0.01)."""
    lo, hi = 0.1, 5.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if kolmogorov_sf(mid) > alpha:
            lo = mid
        else:
            hi = mid
    return hi / math.sqrt(n)


def uniform_cdf(lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda t: np.clip((np.asarray(t) - lo) / (hi - lo), 0.0, 1.0)


def fit_slope(xs, ys) -> tuple[float, float, float]:
    """Ordinary least squares; returns ``(slope, intercept, stderr_slope)``."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) != len(ys):
        raise ValueError("xs and ys differ in length")
    if len(xs) < 3:
        raise ValueError("need at least 3 points")
    xc = xs - xs.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise ValueError("degenerate abscissae")
    slope = float(xc @ (ys - ys.mean())) / sxx
    intercept = float(ys.mean() - slope * xs.mean())
    resid = ys - (intercept + slope * xs)
    stderr = math.sqrt(float(resid @ resid) / (len(xs) - 2) / sxx)
    return slope, intercept, stderr
