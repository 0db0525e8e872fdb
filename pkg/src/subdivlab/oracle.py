"""Numerical integration oracles used to validate closed forms.

The 1-D engine is adaptive Gauss-Kronrod (7/15 points) with interval
bisection. It is batched: many independent integrals are refined together so
that each sweep costs one vectorized integrand call. Cube integrals iterate
the 1-D engine one dimension at a time, passing whole batches of outer nodes
down to the inner level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import RandomSource
from .stats import StreamingMoments

# Kronrod 15-point nodes on [-1, 1]; the 7 Gauss nodes sit at odd indices.
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
])
_EPS = np.finfo(float).eps
DEFAULT_MAX_EVALS = 50_000_000


class IntegrationError(RuntimeError):
    def __init__(self, message: str, partial: "IntegrationResult"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class IntegrationResult:
    value: float
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if self.error_estimate < 0 or self.evaluations <= 0:
            raise ValueError("invalid integration result")


def _gk15(f, owner, lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    t = c[:, None] + h[:, None] * _XK[None, :]
    vals = np.asarray(f(t, owner), dtype=float).reshape(t.shape)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("integrand returned a non-finite value")
    k = h * (vals @ _WK)
    g = h * (vals[:, 1::2] @ _WG)
    resabs = np.abs(h) * (np.abs(vals) @ _WK)
    resasc = np.abs(h) * (np.abs(vals - (k / np.where(h == 0, 1, 2 * h))[:, None]) @ _WK)
    err = np.abs(k - g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    err = np.maximum(err, 50 * _EPS * resabs)
    return k, err


def integrate_batch(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo,
    hi,
    tol: float,
    breakpoints=None,
    max_evals: int = DEFAULT_MAX_EVALS,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Integrate ``n`` independent 1-D integrals at once.

    ``f(t, owner)`` receives nodes ``t`` of shape ``(m, 15)`` and the integral
    index ``owner`` of shape ``(m,)`` for each row. ``breakpoints`` is an
    optional ``(n, k)`` array of interior points where the integrand is not
    smooth. Each integral is refined until its summed error estimate is at
    most ``tol``. Returns ``(values, errors, evaluations)``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    n = lo.size
    if np.any(hi < lo):
        raise ValueError("integration limits must satisfy a <= b")
    if breakpoints is None:
        edges = np.stack([lo, hi], axis=1)
    else:
        bp = np.asarray(breakpoints, dtype=float).reshape(n, -1)
        bp = np.clip(bp, lo[:, None], hi[:, None])
        edges = np.sort(np.concatenate([lo[:, None], bp, hi[:, None]], axis=1), axis=1)
    owner = np.repeat(np.arange(n), edges.shape[1] - 1)
    a = edges[:, :-1].ravel()
    b = edges[:, 1:].ravel()
    keep = b > a
    owner, a, b = owner[keep], a[keep], b[keep]
    val, err = _gk15(f, owner, a, b) if len(a) else (np.zeros(0), np.zeros(0))
    evals = 15 * len(a)
    done_val = np.zeros(n)
    done_err = np.zeros(n)
    while len(a):
        tot = done_err + np.bincount(owner, err, minlength=n)
        cnt = np.bincount(owner, minlength=n)
        open_ = tot > tol
        if not open_.any():
            break
        # bisect intervals at or above their integral's mean error; retire
        # intervals that can no longer be split in floating point
        split = open_[owner] & (err >= (tot - done_err)[owner] / np.maximum(cnt[owner], 1))
        mid = 0.5 * (a + b)
        atomic = (mid <= a) | (mid >= b)
        retire = ~open_[owner] | atomic
        np.add.at(done_val, owner[retire], val[retire])
        np.add.at(done_err, owner[retire], err[retire])
        split &= ~atomic
        stay = ~retire & ~split
        o2 = np.concatenate([owner[split], owner[split]])
        a2 = np.concatenate([a[split], mid[split]])
        b2 = np.concatenate([mid[split], b[split]])
        v2, e2 = _gk15(f, o2, a2, b2)
        evals += 15 * len(a2)
        owner = np.concatenate([owner[stay], o2])
        a = np.concatenate([a[stay], a2])
        b = np.concatenate([b[stay], b2])
        val = np.concatenate([val[stay], v2])
        err = np.concatenate([err[stay], e2])
        if evals > max_evals:
            values = done_val + np.bincount(owner, val, minlength=n)
            errors = done_err + np.bincount(owner, err, minlength=n)
            raise IntegrationError(
                f"no convergence within {max_evals} evaluations",
                IntegrationResult(float(values[0]), float(errors.max()), evals),
            )
    values = done_val + np.bincount(owner, val, minlength=n)
    errors = done_err + np.bincount(owner, err, minlength=n)
    return values, errors, max(evals, 1)


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Sequence[float] | None = None,
    max_evals: int = DEFAULT_MAX_EVALS,
) -> IntegrationResult:
    """Adaptive integral of a vectorized ``f`` over ``[a, b]``.

    Integrable endpoint singularities (``log x`` at 0) are fine because
    Kronrod nodes never touch the interval ends.

    >>> round(integrate_1d(lambda t: t * t, 0.0, 1.0).value, 12)
    0.333333333333
    """
    if not a < b:
        raise ValueError("need a < b")
    bp = None if breakpoints is None else np.asarray(breakpoints, dtype=float)[None, :]
    v, e, n = integrate_batch(lambda t, _o: f(t), a, b, tol, bp, max_evals)
    return IntegrationResult(float(v[0]), float(e[0]), n)


def integrate_cube(
    f: Callable[..., np.ndarray],
    dims: int,
    tol: float = 1e-10,
    inner_breakpoints: Callable[..., np.ndarray] | None = None,
    max_evals: int = DEFAULT_MAX_EVALS,
) -> IntegrationResult:
    """Iterated adaptive integral of ``f(u1, ..., ud)`` over the unit cube.

    ``f`` is evaluated elementwise on equally shaped arrays.
    ``inner_breakpoints(u1, ..., u_{d-1})`` may return an ``(m, k)`` array of
    kinks of the innermost integrand. Inner levels run at a tenth of the
    tolerance of the level above, so the reported error adds the outer
    estimate and the worst inner estimate.
    """
    if dims not in (1, 2, 3):
        raise ValueError("dims must be 1, 2 or 3")
    counter = [0]
    worst_inner = [0.0]

    def level(depth: int, outer: list[np.ndarray], level_tol: float):
        m = len(outer[0]) if outer else 1
        last = depth == dims - 1

        def integrand(t, owner):
            coords = [o[owner][:, None] * np.ones_like(t) for o in outer]
            if last:
                return f(*coords, t)
            flat = [c.ravel() for c in coords] + [t.ravel()]
            inner_vals = level(depth + 1, flat, level_tol / 10)
            return inner_vals.reshape(t.shape)

        bp = inner_breakpoints(*outer) if (last and inner_breakpoints is not None and outer) else None
        vals, errs, n = integrate_batch(integrand, np.zeros(m), np.ones(m), level_tol, bp, max_evals)
        if last:
            counter[0] += n
        if depth > 0 and len(errs):
            worst_inner[0] = max(worst_inner[0], float(errs.max()))
        return vals if outer else (vals, errs)

    if dims == 1:
        bp = None
        if inner_breakpoints is not None:
            bp = np.asarray(inner_breakpoints(), dtype=float).reshape(1, -1)
        v, e, n = integrate_batch(lambda t, _o: f(t), 0.0, 1.0, tol, bp, max_evals)
        return IntegrationResult(float(v[0]), float(e[0]), n)
    vals, errs = level(0, [], tol)
    return IntegrationResult(float(vals[0]), float(errs[0]) + worst_inner[0], max(counter[0], 1))


def mc_integrate(
    f: Callable[..., np.ndarray],
    dims: int,
    n: int,
    src: RandomSource,
    chunk: int = 1 << 20,
) -> IntegrationResult:
    """Plain Monte Carlo over the unit cube; error estimate is 3 standard errors."""
    if n < 2:
        raise ValueError("need n >= 2")
    acc = StreamingMoments()
    done = 0
    while done < n:
        m = min(chunk, n - done)
        u = src.uniform((dims, m))
        acc.update(np.asarray(f(*u), dtype=float) * np.ones(m))
        done += m
    sd = math.sqrt(float(acc.variance(ddof=1)[0]))
    return IntegrationResult(float(acc.mean[0]), 3.0 * sd / math.sqrt(n), n)
