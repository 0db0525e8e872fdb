"""Random inscribed-triangle chain in shape coordinates.

A point is chosen uniformly on each side of the current triangle and the
three points form the next triangle. With the longest side pinned to
``A = (0, 0)``, ``B = (1, 0)`` and apex ``C = (x, y)``, the new vertices are

    A1 = (1 - (1 - x) xi_a, y xi_a),  B1 = (x (1 - xi_b), y (1 - xi_b)),  C1 = (xi_c, 0)

and the height ratio shrinks by ``r = R / max(a1^2, b1^2, c1^2)`` where
``R = xi_a xi_b xi_c + (1 - xi_a)(1 - xi_b)(1 - xi_c)``.

Array functions (suffix ``_many``) carry the simulations; the scalar
functions wrap them for single states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    EQUILATERAL,
    RandomSource,
    ShapeCoord,
    UniformTriple,
    map_replica_blocks,
    shape_from_vertices_many,
)
from .oracle import integrate_1d
from .stats import StreamingMoments, merge_all

LOG_R_MEAN = math.pi**2 / 9 - 8.0 / 3.0
KAPPA = (5.0 - math.log(4.0)) / 6.0
RATE_BOUND = 1.0 + math.log(4.0) / 3.0 - math.pi**2 / 9.0


@dataclass(frozen=True)
class SideLengthsSquared:
    a2: float
    b2: float
    c2: float


@dataclass(frozen=True)
class StepDiagnostics:
    r: float
    R: float
    S: float
    mu: float
    nu: float
    delta: float


def _xi(xi):
    if isinstance(xi, UniformTriple):
        return xi.xi_a, xi.xi_b, xi.xi_c
    return xi


def side_lengths_sq_many(x, y, xa, xb, xc):
    a2 = (x * (1 - xb) - xc) ** 2 + (y * (1 - xb)) ** 2
    b2 = ((1 - (1 - x) * xa) - xc) ** 2 + (y * xa) ** 2
    c2 = ((1 - (1 - x) * xa) - x * (1 - xb)) ** 2 + (y * (1 - xa - xb)) ** 2
    return a2, b2, c2


def side_lengths_sq(s: ShapeCoord, xi) -> SideLengthsSquared:
    a2, b2, c2 = side_lengths_sq_many(s.x, s.y, *_xi(xi))
    return SideLengthsSquared(float(a2), float(b2), float(c2))


def area_factor(xa, xb, xc):
    """``R``: ratio of the new triangle's area to the old one."""
    return xa * xb * xc + (1 - xa) * (1 - xb) * (1 - xc)


def step_many(x, y, xa, xb, xc):
    """One step for arrays of states and uniforms.

    Returns ``(x1, y1, r, R, S, mu, nu, delta)``.
    """
    a2, b2, c2 = side_lengths_sq_many(x, y, xa, xb, xc)
    big = np.maximum(np.maximum(a2, b2), c2)
    small = np.minimum(np.minimum(a2, b2), c2)
    if np.any(big == 0):
        raise ValueError("degenerate child")
    R = area_factor(xa, xb, xc)
    r = R / big
    x1 = (a2 + b2 + c2 - 2 * small) / (2 * big)
    x1 = np.clip(np.maximum(x1, 1 - x1), 0.5, 1.0)
    y1 = y * r
    mu = 1 - (1 - x) * xa
    nu = x * (1 - xb)
    return x1, y1, r, R, np.sqrt(big), mu, nu, 0.5 * y * R


def step(s: ShapeCoord, xi) -> tuple[ShapeCoord, StepDiagnostics]:
    x1, y1, r, R, S, mu, nu, delta = (float(v) for v in step_many(s.x, s.y, *_xi(xi)))
    return ShapeCoord(x1, y1), StepDiagnostics(r, R, S, mu, nu, delta)


def step_via_vertices_many(x, y, xa, xb, xc):
    """Independent route: build the inscribed triangle explicitly and renormalize it."""
    x, y, xa, xb, xc = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, xa, xb, xc)))
    if np.any(y <= 0):
        raise ValueError("vertex route needs y > 0")
    A = np.stack([np.zeros_like(x), np.zeros_like(x)], axis=-1)
    B = np.stack([np.ones_like(x), np.zeros_like(x)], axis=-1)
    C = np.stack([x, y], axis=-1)
    # xi_a = |B A1| / |BC|, xi_b = |C B1| / |CA|, xi_c = |A C1| / |AB|
    A1 = B + xa[..., None] * (C - B)
    B1 = C + xb[..., None] * (A - C)
    C1 = A + xc[..., None] * (B - A)
    return shape_from_vertices_many(A1, B1, C1)


def step_via_vertices(s: ShapeCoord, xi) -> ShapeCoord:
    x1, y1 = step_via_vertices_many(s.x, s.y, *_xi(xi))
    return ShapeCoord(float(x1), float(y1))


def max_side_y0_many(x, xa, xb, xc):
    mu = 1 - (1 - x) * xa
    nu = x * (1 - xb)
    return np.where(xc < nu, mu - xc, np.where(xc <= mu, mu - nu, xc - nu))


def max_side_y0(x: float, xi) -> float:
    """Longest new side when the triangle is flat (``y = 0``)."""
    if not 0.5 <= x <= 1.0:
        raise ValueError("x must lie in [1/2, 1]")
    return float(max_side_y0_many(x, *_xi(xi)))


# ---------------------------------------------------------------- closed forms


def _positive_log(v):
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("log argument not positive: branch-singular parameters")
    return np.log(v)


def _check_open(name, v, lo=0.0, hi=1.0):
    v = np.asarray(v, dtype=float)
    if np.any((v <= lo) | (v >= hi)):
        raise ValueError(f"{name} must lie in ({lo}, {hi})")
    return v


def closed_form_I(x, xi_a, xi_b):
    """The three pieces of ``E[r(x, 0) | xi_a, xi_b]`` split at ``xi_c = nu`` and ``xi_c = mu``."""
    x = _check_open("x", x, 0.5, 1.0)
    a = _check_open("xi_a", xi_a)
    b = _check_open("xi_b", xi_b)
    mid = b * x + (1 - x) * (1 - a)
    d1 = 1 - a + a * x
    d3 = 1 - x + b * x
    I1 = (a + b - 1) * _positive_log(mid / d1) + (1 - b) * a * x / d1
    I2 = (a + 1 - b) / 2
    I3 = (a + b - 1) * _positive_log(d3 / mid) + a * (1 - b) * (1 - x) / d3
    return I1, I2, I3


def cond_r_given_ab(x, xi_a, xi_b, variant: str = "corrected"):
    """``E[r(x, 0) | xi_a, xi_b]`` in combined form.

    ``variant="printed"`` reproduces the combined expression with the
    quadratic coefficient ``(xi_a + xi_b - 1)``, which disagrees with
    ``I1 + I2 + I3``; the default uses ``(xi_a - xi_b + 1)``, which agrees.
    """
    x = _check_open("x", x, 0.5, 1.0)
    a = _check_open("xi_a", xi_a)
    b = _check_open("xi_b", xi_b)
    d1 = 1 - a + a * x
    d3 = 1 - x + b * x
    if variant == "corrected":
        quad = a - b + 1
    elif variant == "printed":
        quad = a + b - 1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return (
        (a + b - 1) * _positive_log(d3 / d1)
        + (a + 1 - b) / 2
        - a * (1 - b) * (x * x * quad + a * (1 - 2 * x) - 1) / (d1 * d3)
    )


def cond_r_given_a(x, xi_a):
    """``E[r(x, 0) | xi_a]``."""
    x = _check_open("x", x, 0.5, 1.0)
    a = _check_open("xi_a", xi_a)
    d1 = 1 - a + a * x
    head = x * (x + 1 - a * (1 - x) * (2 * x + 3 - a * (2 - x)))
    tail = (1 - 2 * a) * d1 * ((1 - x * x) * _positive_log(1 - x) + x * x * _positive_log(d1))
    return (head + tail) / (2 * x * x * d1)


def expected_log_R() -> float:
    return LOG_R_MEAN


def expected_log_S(x, variant: str = "corrected"):
    """``E[log S(x; xi)]`` for a flat triangle with apex abscissa ``x``.

    ``variant="printed"`` keeps ``(1 - x)^3 log(x)`` in the numerator; the
    default uses ``(1 - x)^3 log(1 - x)``. At ``x = 1`` the removable limit
    ``-1/2`` is returned.
    """
    xv = np.asarray(x, dtype=float)
    if np.any((xv <= 0) | (xv > 1)):
        raise ValueError("x must lie in (0, 1]")
    if variant not in ("corrected", "printed"):
        raise ValueError(f"unknown variant {variant!r}")
    interior = xv < 1
    xs = np.where(interior, xv, 0.5)
    second = np.log(1 - xs) if variant == "corrected" else np.log(xs)
    val = -5.0 / 6.0 - (xs**3 * np.log(xs) + (1 - xs) ** 3 * second) / (3 * xs * (1 - xs))
    out = np.where(interior, val, -0.5)
    return float(out) if out.ndim == 0 else out


def stationary_lyapunov() -> float:
    """Growth rate of ``log y`` once ``x`` follows its uniform limit on [1/2, 1].

    ``E log R - 2 E log S`` with ``x ~ U[1/2, 1]`` (density 2).
    """
    mean_log_s = 2.0 * integrate_1d(lambda t: expected_log_S(t), 0.5, 1.0, tol=1e-13).value
    return LOG_R_MEAN - 2.0 * mean_log_s


# ------------------------------------------------------------- chi and limits


def chi(mu, nu, xi_c):
    """Relative position of the middle point among three points on a line."""
    pts = np.sort(np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mu, nu, xi_c)))), axis=0)
    spread = pts[2] - pts[0]
    if np.any(spread == 0):
        raise ValueError("zero spread")
    out = (pts[1] - pts[0]) / spread
    return float(out) if out.ndim == 0 else out


def chi_cdf_terms(x: float, z: float) -> tuple[float, float, float]:
    """``P(chi <= z)`` split by where ``xi_c`` falls: below ``nu``, between, above ``mu``."""
    if not (0 < x < 1 and 0 < z < 1):
        raise ValueError("x and z must lie in (0, 1)")
    if x < z:
        one = (3 * z - x * z * z - z * x - x) * x / (6 * z * (1 - x))
        three = (3 * z * z + z * z * x * x - 3 * z * z * x + z * x * x - 3 * z * x + x * x) / (6 * z * (1 - x))
    else:
        one = (3 * x - z * x * x - x * z - z) * z / (6 * x * (1 - z))
        three = (1 - x) ** 2 * z * z / (6 * (1 - z) * x)
    return one, z / 2, three


def chi_term_indicators(x: float, z: float, xa, xb, xc):
    """Indicator integrands of the three CDF pieces, from the raw geometry."""
    mu = 1 - (1 - x) * xa
    nu = x * (1 - xb)
    c = chi(mu, nu, xc)
    hit = c <= z
    return (
        (hit & (xc < nu)).astype(float),
        (hit & (xc >= nu) & (xc <= mu)).astype(float),
        (hit & (xc > mu)).astype(float),
    )


def _draw(src: RandomSource, count: int):
    u = src.uniform((3, count))
    return u[0], u[1], u[2]


def simulate_x_limit(
    n: int,
    replicas: int,
    src: RandomSource,
    s0: ShapeCoord = EQUILATERAL,
    threads: int | None = None,
) -> np.ndarray:
    """Final ``x`` of independent chains after ``n`` steps."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def block(bsrc: RandomSource, count: int) -> np.ndarray:
        x = np.full(count, s0.x)
        log_y = np.full(count, math.log(s0.y) if s0.y > 0 else -np.inf)
        for _ in range(n):
            xa, xb, xc = _draw(bsrc, count)
            x, log_y = _advance(x, log_y, xa, xb, xc)[:2]
        return x

    return np.concatenate(map_replica_blocks(block, replicas, src, threads))


def _advance(x, log_y, xa, xb, xc):
    """Step carried in ``log y`` so long runs do not underflow."""
    y = np.exp(log_y)
    x1, _, r, R, S, _, _, _ = step_many(x, y, xa, xb, xc)
    return x1, log_y + np.log(r), r, R, S


@dataclass(frozen=True)
class LyapunovEstimate:
    slope: float
    stderr: float
    intercept: float
    window: tuple[int, int]
    replicas: int
    mean_log_y: np.ndarray
    residual_stderr: float


def lyapunov_estimate(
    n: int,
    replicas: int,
    src: RandomSource,
    s0: ShapeCoord = EQUILATERAL,
    threads: int | None = None,
    trace: int = 0,
) -> tuple[LyapunovEstimate, list[tuple]]:
    """Least-squares slope of mean ``log y_k`` over ``k`` in ``[n // 4, n]``.

    The slope of the replica-mean curve equals the mean of per-replica OLS
    slopes, and the spread of those per-replica slopes gives the standard
    error (the mean curve's own residuals are serially correlated). The
    first ``trace`` replicas of block 0 are also returned as trajectory rows
    ``(replica, step, x, y, log_y, r, R, S)``.
    """
    if n < 100:
        raise ValueError("n must be >= 100")
    if s0.y <= 0:
        raise ValueError("flat start: log y is -inf and the slope is undefined")
    lo = n // 4
    ks = np.arange(lo, n + 1, dtype=float)
    w = (ks - ks.mean()) / float(((ks - ks.mean()) ** 2).sum())

    def block(bsrc: RandomSource, count: int):
        x = np.full(count, s0.x)
        log_y = np.full(count, math.log(s0.y))
        slopes = np.zeros(count)
        curve = np.zeros(n + 1)
        curve[0] = log_y.sum()
        rows = []
        for k in range(1, n + 1):
            xa, xb, xc = _draw(bsrc, count)
            x, log_y, r, R, S = _advance(x, log_y, xa, xb, xc)
            if k >= lo:
                slopes += w[k - lo] * log_y
            curve[k] = log_y.sum()
            for i in range(min(trace, count)):
                rows.append((i, k, x[i], math.exp(log_y[i]), log_y[i], r[i], R[i], S[i]))
        return StreamingMoments.of(slopes), curve, rows

    parts = map_replica_blocks(block, replicas, src, threads)
    acc = merge_all(p[0] for p in parts)
    curve = np.sum([p[1] for p in parts], axis=0) / replicas
    slope = float(acc.mean[0])
    stderr = float(acc.stderr()[0]) if replicas > 1 else float("nan")
    from .stats import fit_slope

    fit_s, intercept, resid_se = fit_slope(ks, curve[lo:])
    if not math.isclose(fit_s, slope, rel_tol=1e-9, abs_tol=1e-12):
        raise AssertionError("replica-mean slope disagrees with the mean-curve fit")
    est = LyapunovEstimate(slope, stderr, intercept, (lo, n), replicas, curve, resid_se)
    return est, parts[0][2]


# ------------------------------------------------------- supermartingale / E


SHAPE_GRID = tuple(
    (x, y)
    for x in (0.55, 0.7, 0.85, 1.0)
    for y in (0.05, 0.2, 0.4, 0.6, 0.8)
    if x * x + y * y <= 1.0 and y <= math.sqrt(3) / 2
)


def conditional_r_mean(s: ShapeCoord, draws: int, src: RandomSource) -> tuple[float, float]:
    """Monte Carlo ``E[r(x, y)]`` at a fixed shape with its standard error."""
    xa, xb, xc = _draw(src, draws)
    r = step_many(s.x, s.y, xa, xb, xc)[2]
    acc = StreamingMoments.of(r)
    return float(acc.mean[0]), float(acc.stderr()[0])


def event_mask(xa, xb):
    """The event ``xi_a < 0.1, xi_b > 0.9`` on which ``r < 1/3``."""
    return (xa < 0.1) & (xb > 0.9)


def supermartingale_and_event_checks(n: int, replicas: int, src: RandomSource, event_draws: int = 10**6) -> dict:
    """Empirical counterparts of ``E[y_{n+1} | F_n] <= y_n`` and the shrink event.

    (i) conditional mean of ``r`` on a grid of shapes and along one ``n``-step
    path from ``(x, y) = (0.75, 0.5)``, each from ``replicas`` draws;
    (ii) ``r < 1/3`` for every draw in the event; (iii) event frequency.
    """
    grid = []
    gsrc = src.child(0)
    for k, (x, y) in enumerate(SHAPE_GRID):
        m, se = conditional_r_mean(ShapeCoord(x, y), replicas, gsrc.child(k))
        grid.append({"x": x, "y": y, "mean_r": m, "stderr": se, "pass": m <= 1 + 3 * se})

    path = []
    psrc = src.child(1)
    s = ShapeCoord(0.75, 0.5)
    for k in range(n):
        m, se = conditional_r_mean(s, replicas, psrc.child(2 * k))
        path.append({"step": k, "x": s.x, "y": s.y, "mean_r": m, "stderr": se, "pass": m <= 1 + 3 * se})
        xa, xb, xc = _draw(psrc.child(2 * k + 1), 1)
        x1, y1 = step_many(s.x, s.y, xa, xb, xc)[:2]
        if y1[0] <= 0:
            break
        s = ShapeCoord(float(x1[0]), float(y1[0]))

    esrc = src.child(2)
    xa, xb, xc = _draw(esrc, event_draws)
    hit = event_mask(xa, xb)
    freq = float(hit.mean())
    sigma = math.sqrt(0.01 * 0.99 / event_draws)
    # r on the event at the reference shape and at shapes spread over the domain
    xs = 0.5 + 0.5 * esrc.uniform(event_draws)
    ys = esrc.uniform(event_draws) * np.sqrt(np.maximum(1 - xs * xs, 0.0))
    r_ref = step_many(0.75, 0.2, xa[hit], xb[hit], xc[hit])[2]
    r_any = step_many(xs[hit], ys[hit], xa[hit], xb[hit], xc[hit])[2]
    r_flat = step_many(xs[hit], 0.0, xa[hit], xb[hit], xc[hit])[2]
    r_max = float(max(r_ref.max(), r_any.max(), r_flat.max()))
    return {
        "grid": grid,
        "path": path,
        "event_frequency": freq,
        "event_sigma": sigma,
        "event_frequency_pass": abs(freq - 0.01) <= 3 * sigma,
        "event_samples": int(hit.sum()),
        "event_max_r": r_max,
        "event_r_pass": r_max < 1.0 / 3.0,
        "pass": all(g["pass"] for g in grid) and all(p["pass"] for p in path)
        and abs(freq - 0.01) <= 3 * sigma and r_max < 1.0 / 3.0,
    }


def sigma_tail_check(z_grid, samples: int, src: RandomSource) -> list[dict]:
    """Empirical ``P(-log S >= z)`` against ``2 exp(-z)`` for flat triangles, ``x ~ U[1/2, 1]``."""
    z_grid = list(z_grid)
    for z in z_grid:
        if z < math.log(2):
            raise ValueError("z must be >= log 2 so the bound is informative")
    x = 0.5 + 0.5 * src.uniform(samples)
    xa, xb, xc = _draw(src, samples)
    sigma_n = -np.log(max_side_y0_many(x, xa, xb, xc))
    rows = []
    for z in z_grid:
        bound = min(1.0, 2.0 * math.exp(-z))
        emp = float(np.mean(sigma_n >= z))
        sd = math.sqrt(bound * (1 - bound) / samples)
        rows.append({"z": z, "empirical": emp, "bound": bound, "sigma": sd, "pass": emp <= bound + 3 * sd})
    return rows
