"""Experiment runners behind the command line: each returns a report and writes its data files."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import bisector, quadchain, subtriangle
from .core import DEFAULT_SEED, SQRT3_2, RandomSource
from .oracle import integrate_batch, integrate_cube, mc_integrate
from .report import Claim, SummaryReport, write_csv, write_json
from .stats import ks_2samp, ks_test, uniform_cdf

CHECKS = {
    "quad": ("rate", "limit"),
    "bisector": ("contraction", "moments", "stationarity"),
    "subtriangle": ("equivalence", "lyapunov", "tail", "event", "limit"),
    "verify": ("closed-forms",),
}

# (steps, replicas) used when the flags are omitted
DEFAULTS = {
    ("quad", "rate"): (40, 20),
    ("quad", "limit"): (30, 100_000),
    ("bisector", "contraction"): (1, 10_000),
    ("bisector", "moments"): (60, 1_000_000),
    ("bisector", "stationarity"): (60, 100_000),
    ("subtriangle", "equivalence"): (1, 100_000),
    ("subtriangle", "lyapunov"): (200, 10_000),
    ("subtriangle", "tail"): (1, 1_000_000),
    ("subtriangle", "event"): (30, 10_000),
    ("subtriangle", "limit"): (50, 100_000),
    ("verify", "closed-forms"): (1, 10_000_000),
}

# stream index per experiment, so checks never share random numbers
STREAMS = {key: i for i, key in enumerate(DEFAULTS)}

KS_P_MIN = 1e-3
LYAPUNOV_BOUND = -0.3654
DEFAULT_Z_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
DEFAULT_X_GRID = tuple(float(v) for v in np.round(np.linspace(0.51, 0.99, 10), 10))


@dataclass
class RunConfig:
    command: str
    check: str = "all"
    seed: int = DEFAULT_SEED
    steps: int | None = None
    replicas: int | None = None
    bins: int = 100
    resolution: int = 50
    x_grid: tuple[float, ...] = DEFAULT_X_GRID
    z_grid: tuple[float, ...] = DEFAULT_Z_GRID
    out: Path = Path("out")
    format: str = "json"
    threads: int | None = None
    timing: bool = False

    def __post_init__(self):
        if self.command not in CHECKS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.check != "all" and self.check not in CHECKS[self.command]:
            raise ValueError(f"unknown check {self.check!r} for {self.command}")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.replicas is not None and self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.bins < 1 or self.resolution < 1:
            raise ValueError("bins and resolution must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def checks(self) -> tuple[str, ...]:
        return CHECKS[self.command] if self.check == "all" else (self.check,)

    def sizes(self, check: str) -> tuple[int, int]:
        steps, replicas = DEFAULTS[(self.command, check)]
        return self.steps or steps, self.replicas or replicas

    def source(self, check: str) -> RandomSource:
        return RandomSource(self.seed, STREAMS[(self.command, check)])

    def echo(self) -> dict:
        """Everything that determines the outputs (thread count and paths do not)."""
        d = asdict(self)
        for k in ("out", "threads", "timing", "format"):
            d.pop(k)
        d["x_grid"] = list(self.x_grid)
        d["z_grid"] = list(self.z_grid)
        d["resolved"] = {c: dict(zip(("steps", "replicas"), self.sizes(c))) for c in self.checks()}
        return d


class _Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.report = SummaryReport(cfg.command, cfg.echo())

    def claim(self, *args, **kw) -> Claim:
        c = Claim(*args, **kw)
        self.report.add(c)
        return c

    def csv(self, name: str, header, rows) -> None:
        write_csv(self.out / name, header, rows)
        self.report.artifacts.append(name)

    def json(self, name: str, obj) -> None:
        write_json(self.out / name, obj)
        self.report.artifacts.append(name)


# ------------------------------------------------------------------ quad


def _quad_rate(run: _Run) -> None:
    steps, paths = run.cfg.sizes("rate")
    src = run.cfg.source("rate")
    worst_halving = worst_env = worst_mismatch = 0.0
    first = None
    for p in range(paths):
        res = quadchain.rate_check(quadchain.KITE_EXAMPLE, steps, src.child(p))
        worst_halving = max(worst_halving, res["max_halving_rel_error"])
        worst_env = max(worst_env, res["max_defect_over_envelope"])
        worst_mismatch = max(worst_mismatch, res["max_vertex_pair_mismatch"])
        if first is None:
            first = res
    run.csv("quad_trajectory.csv", ("step", "ux", "uy", "vx", "vy", "defect"), quadchain.trajectory_rows(first["quads"]))
    run.claim("|u_n - v_n| = 2^-n |u_0 - v_0| (relative error)", 0.0, worst_halving, 1e-12)
    run.claim("defect_n / (K 2^(1-n)) <= 1", 1.0, worst_env, 0.0, "upper_bound")
    run.claim("vertex chain side vectors = pair recursion", 0.0, worst_mismatch, 1e-9)


def _quad_limit(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("limit")
    t = quadchain.limit_parameters(steps, replicas, run.cfg.source("limit"), run.cfg.threads)
    run.csv("quad_limit.csv", ("replica", "t"), ((i, float(v)) for i, v in enumerate(t)))
    ks = ks_test(t, uniform_cdf(0.0, 1.0))
    run.claim(f"KS p-value of X_{steps} segment parameter vs U[0,1]", KS_P_MIN, ks.p_value, 0.0, "lower_bound")


# -------------------------------------------------------------- bisector


def _random_simplex(src: RandomSource, n: int) -> np.ndarray:
    return src.generator.dirichlet(np.ones(3), size=n)


def _bisector_contraction(run: _Run) -> None:
    _, pairs = run.cfg.sizes("contraction")
    src = run.cfg.source("contraction")
    u = _random_simplex(src, pairs)
    v = _random_simplex(src, pairs)
    d = np.linalg.norm(u - v, axis=1)
    ratios = np.log(np.linalg.norm(bisector.children_many(u) - bisector.children_many(v), axis=-1) / d[:, None])
    avg = ratios.mean(axis=1)
    run.csv("bisector_contraction.csv", ("pair", "mean_log_ratio"), ((i, float(a)) for i, a in enumerate(avg)))
    run.claim("average log contraction <= log(sqrt(3)/2)", bisector.CONTRACTION_BOUND, float(avg.max()), 1e-12, "upper_bound")
    pair_sums = ratios[:, 0::2] + ratios[:, 1::2]
    for k in range(3):
        run.claim(f"maps {2 * k + 1}+{2 * k + 2} log ratio sum <= log(3/4)", bisector.PAIR_BOUND,
                  float(pair_sums[:, k].max()), 1e-12, "upper_bound")


def _bisector_moments(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("moments")
    samples = bisector.simulate(steps, replicas, run.cfg.source("moments"), threads=run.cfg.threads)
    m = bisector.moments_from_samples(samples)
    resid, resid_se = bisector.closure_residual(m)
    run.csv("bisector_samples.csv", ("replica", "a", "b", "c"), ((i, *map(float, s)) for i, s in enumerate(samples)))
    tern = bisector.build_ternary_histogram(samples, run.cfg.resolution)
    run.csv("bisector_ternary.csv", ("i", "j", "count"), tern.cells())
    hist = bisector.build_angle_histogram(samples, run.cfg.bins)
    run.csv("bisector_angles.csv", ("bin_left", "bin_right", "count"), hist.rows())
    run.json("bisector_moments.json", {"config": run.report.config, "moments": m.as_dict(),
                                       "closure_residual": resid, "closure_stderr": resid_se})
    run.claim("E ᾱ = 1/3", 1 / 3, m.mean_a, 1e-3)
    run.claim("E ᾱ² = 1/7", 1 / 7, m.second_a, 1e-3)
    run.claim("E ᾱβ̄ = 2/21", 2 / 21, m.cross_ab, 1e-3)
    run.claim("Cov(ᾱ, β̄) = -1/63", -1 / 63, m.cov_ab, 1e-3)
    run.claim("second-moment closure residual = 0", 0.0, resid, 3 * resid_se if resid_se > 0 else 1e-12)


def _bisector_stationarity(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("stationarity")
    src = run.cfg.source("stationarity")
    early = bisector.simulate(steps, replicas, src.child(0), threads=run.cfg.threads)
    late = bisector.simulate(2 * steps, replicas, src.child(1), threads=run.cfg.threads)
    ks = ks_2samp(early[:, 0], late[:, 0])
    run.claim(f"two-sample KS p-value, component a at n={steps} vs n={2 * steps}", 0.01, ks.p_value, 0.0, "lower_bound")
    scan = bisector.atom_scan(late[:, 0])
    run.json("bisector_atom_scan.json", scan)
    run.claim("largest multiplicity at resolution 1e-9 (atom screen)", 10.0, float(scan["largest_multiplicity"]), 0.0, "upper_bound")


# ----------------------------------------------------------- subtriangle


def _random_shapes(src: RandomSource, n: int, positive: bool = True):
    x = 0.5 + 0.5 * src.uniform(n)
    top = np.minimum(np.sqrt(np.maximum(1 - x * x, 0.0)), SQRT3_2)
    y = top * (1 - src.uniform(n)) if positive else top * src.uniform(n)
    return x, y


def _sub_equivalence(run: _Run) -> None:
    _, n = run.cfg.sizes("equivalence")
    src = run.cfg.source("equivalence")
    x, y = _random_shapes(src, n)
    xa, xb, xc = src.uniform((3, n))
    a = subtriangle.step_many(x, y, xa, xb, xc)
    b = subtriangle.step_via_vertices_many(x, y, xa, xb, xc)
    dev = float(max(np.abs(a[0] - b[0]).max(), np.abs(a[1] - b[1]).max()))
    run.claim("step = step_via_vertices (max abs deviation)", 0.0, dev, 1e-10)


def _sub_lyapunov(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("lyapunov")
    est, rows = subtriangle.lyapunov_estimate(steps, replicas, run.cfg.source("lyapunov"), threads=run.cfg.threads, trace=4)
    run.csv("subtriangle_trajectory.csv", ("replica", "step", "x", "y", "log_y", "r", "R", "S"), rows)
    lam = subtriangle.stationary_lyapunov()
    run.claim(f"Lyapunov slope + 3 stderr < {LYAPUNOV_BOUND}", LYAPUNOV_BOUND, est.slope + 3 * est.stderr, 0.0, "upper_bound")
    run.claim("Lyapunov slope = stationary prediction", lam, est.slope, 3 * est.stderr)


def _sub_tail(run: _Run) -> None:
    _, n = run.cfg.sizes("tail")
    rows = subtriangle.sigma_tail_check(run.cfg.z_grid, n, run.cfg.source("tail"))
    run.csv("subtriangle_tail.csv", ("z", "empirical", "bound", "sigma", "pass"),
            ((r["z"], r["empirical"], r["bound"], r["sigma"], str(r["pass"]).lower()) for r in rows))
    for r in rows:
        run.claim(f"P(-log S >= {r['z']:g}) <= 2e^-z + 3σ", r["bound"], r["empirical"], 3 * r["sigma"], "upper_bound")


def _sub_event(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("event")
    res = subtriangle.supermartingale_and_event_checks(steps, replicas, run.cfg.source("event"))
    run.json("subtriangle_event.json", res)
    worst = max(g["mean_r"] - 3 * g["stderr"] for g in res["grid"] + res["path"])
    run.claim("E[r | shape] - 3 stderr <= 1 (supermartingale)", 1.0, worst, 0.0, "upper_bound")
    run.claim("P(E) = 0.01", 0.01, res["event_frequency"], 3 * res["event_sigma"])
    run.claim("max r on E < 1/3", 1 / 3, res["event_max_r"], 0.0, "upper_bound")


def _chi_claims(run: _Run, src: RandomSource, mc_samples: int) -> list[dict]:
    xs = np.linspace(0.01, 0.99, 50)
    dev = max(abs(sum(subtriangle.chi_cdf_terms(x, z)) - z) for x in xs for z in xs)
    run.claim("(I)+(II)+(III)=z", 0.0, dev, 1e-10)
    rows = [{"name": "(I)+(II)+(III)=z", "max_abs_deviation": dev, "grid": "50x50 on [0.01, 0.99]^2",
             "tolerance": 1e-10, "pass": dev <= 1e-10}]
    for k, (x, z) in enumerate(((0.7, 0.4), (0.3, 0.6))):
        exact = subtriangle.chi_cdf_terms(x, z)
        for term, label in ((0, "(I)"), (2, "(III)")):
            res = mc_integrate(lambda a, b, c, term=term: subtriangle.chi_term_indicators(x, z, a, b, c)[term],
                               3, mc_samples, src.child(2 * k + term // 2))
            run.claim(f"{label} at (x, z) = ({x}, {z}) vs Monte Carlo", exact[term], res.value, res.error_estimate)
            rows.append({"name": f"{label} at ({x}, {z})", "max_abs_deviation": abs(res.value - exact[term]),
                         "grid": f"Monte Carlo, {mc_samples} samples", "tolerance": res.error_estimate,
                         "pass": abs(res.value - exact[term]) <= res.error_estimate})
    return rows


def _sub_limit(run: _Run) -> None:
    steps, replicas = run.cfg.sizes("limit")
    src = run.cfg.source("limit")
    xs = subtriangle.simulate_x_limit(steps, replicas, src.child(0), threads=run.cfg.threads)
    run.csv("subtriangle_x_limit.csv", ("replica", "x"), ((i, float(v)) for i, v in enumerate(xs)))
    ks = ks_test(xs, uniform_cdf(0.5, 1.0))
    run.claim(f"KS p-value of x_{steps} vs U[1/2,1]", KS_P_MIN, ks.p_value, 0.0, "lower_bound")
    run.claim(f"mean of x_{steps} = 3/4", 0.75, float(xs.mean()), 3 * math.sqrt(1 / 48 / replicas))
    _chi_claims(run, src.child(1), DEFAULTS[("verify", "closed-forms")][1])


# ---------------------------------------------------------------- verify


def _grid(lo, hi, n):
    # cell midpoints keep away from the branch-singular ends
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def verify_closed_forms(x_grid=DEFAULT_X_GRID, tol: float = 1e-12) -> list[dict]:
    """Every closed form against the adaptive quadrature oracle."""
    rows = []

    def row(name, dev, grid, tolerance, **extra):
        rows.append({"name": name, "max_abs_deviation": float(dev), "grid": grid,
                     "tolerance": tolerance, "pass": bool(dev <= tolerance), **extra})

    xg, ag, bg = np.meshgrid(_grid(0.5, 1.0, 10), _grid(0, 1, 10), _grid(0, 1, 10), indexing="ij")
    x, a, b = xg.ravel(), ag.ravel(), bg.ravel()
    mu = 1 - (1 - x) * a
    nu = x * (1 - b)
    I1, I2, I3 = subtriangle.closed_form_I(x, a, b)

    def r_flat(pieces):
        def f(t, o):
            S = pieces(t, o)
            return subtriangle.area_factor(a[o][:, None], b[o][:, None], t) / (S * S)
        return f

    q1 = integrate_batch(r_flat(lambda t, o: mu[o][:, None] - t), np.zeros_like(x), nu, tol)[0]
    q2 = integrate_batch(r_flat(lambda t, o: (mu - nu)[o][:, None] + 0 * t), nu, mu, tol)[0]
    q3 = integrate_batch(r_flat(lambda t, o: t - nu[o][:, None]), mu, np.ones_like(x), tol)[0]
    grid3 = "10x10x10 midpoints of (1/2,1) x (0,1) x (0,1)"
    row("I1", np.abs(I1 - q1).max(), grid3, 1e-8)
    row("I2", np.abs(I2 - q2).max(), grid3, 1e-8)
    row("I3", np.abs(I3 - q3).max(), grid3, 1e-8)

    def r_given_c(t, o):
        S = subtriangle.max_side_y0_many(x[o][:, None], a[o][:, None], b[o][:, None], t)
        return subtriangle.area_factor(a[o][:, None], b[o][:, None], t) / (S * S)

    qab = integrate_batch(r_given_c, 0.0, np.ones_like(x), tol, np.stack([nu, mu], axis=1))[0]
    printed = np.abs(subtriangle.cond_r_given_ab(x, a, b, "printed") - qab).max()
    row("E[r | ξₐ, ξᵦ]", np.abs(subtriangle.cond_r_given_ab(x, a, b) - qab).max(), grid3, 1e-8,
        printed_variant_deviation=float(printed))
    row("I1 + I2 + I3 = E[r | ξₐ, ξᵦ]", np.abs(I1 + I2 + I3 - subtriangle.cond_r_given_ab(x, a, b)).max(), grid3, 1e-10)

    x2, a2 = (v.ravel() for v in np.meshgrid(_grid(0.5, 1.0, 10), _grid(0, 1, 10), indexing="ij"))
    qa = integrate_batch(lambda t, o: subtriangle.cond_r_given_ab(x2[o][:, None], a2[o][:, None], t),
                         0.0, np.ones_like(x2), tol)[0]
    row("E[r | ξₐ]", np.abs(subtriangle.cond_r_given_a(x2, a2) - qa).max(), "10x10 midpoints of (1/2,1) x (0,1)", 1e-8)

    xs = np.asarray(x_grid, dtype=float)
    norm = integrate_batch(lambda t, o: subtriangle.cond_r_given_a(xs[o][:, None], t), 0.0, np.ones_like(xs), tol)[0]
    row("∫E[r|ξₐ]dξₐ = 1", np.abs(norm - 1).max(), f"x in {[float(v) for v in xs]}", 1e-6)

    log_r = integrate_cube(lambda u, v, w: np.log(subtriangle.area_factor(u, v, w)), 3, tol=1e-10)
    row("E log R = π²/9−8/3", abs(log_r.value - subtriangle.expected_log_R()), "unit cube, iterated adaptive Gauss-Kronrod",
        1e-8, oracle_value=log_r.value, oracle_error=log_r.error_estimate)

    dev = printed_dev = 0.0
    xs_s = np.round(np.linspace(0.5, 0.95, 10), 10)
    for xv in xs_s:
        res = integrate_cube(
            lambda u, v, w: np.log(subtriangle.max_side_y0_many(xv, u, v, w)), 3, tol=1e-10,
            inner_breakpoints=lambda u, v: np.stack([xv * (1 - v), 1 - (1 - xv) * u], axis=-1),
        )
        dev = max(dev, abs(res.value - subtriangle.expected_log_S(xv)))
        printed_dev = max(printed_dev, abs(res.value - subtriangle.expected_log_S(xv, "printed")))
    row("E log S(x)", dev, f"x in {[float(v) for v in xs_s]}", 1e-8, printed_variant_deviation=printed_dev)
    row("E log S(1/2) = (log 4 − 5)/6", abs(subtriangle.expected_log_S(0.5) - (math.log(4) - 5) / 6), "x = 1/2", 1e-12)
    return rows


def _verify(run: _Run) -> None:
    _, mc = run.cfg.sizes("closed-forms")
    rows = verify_closed_forms(run.cfg.x_grid)
    for r in rows:
        run.claim(r["name"], 0.0, r["max_abs_deviation"], r["tolerance"])
    rows += _chi_claims(run, run.cfg.source("closed-forms"), mc)
    run.json("verification.json", {"config": run.report.config, "checks": rows})


RUNNERS = {
    ("quad", "rate"): _quad_rate,
    ("quad", "limit"): _quad_limit,
    ("bisector", "contraction"): _bisector_contraction,
    ("bisector", "moments"): _bisector_moments,
    ("bisector", "stationarity"): _bisector_stationarity,
    ("subtriangle", "equivalence"): _sub_equivalence,
    ("subtriangle", "lyapunov"): _sub_lyapunov,
    ("subtriangle", "tail"): _sub_tail,
    ("subtriangle", "event"): _sub_event,
    ("subtriangle", "limit"): _sub_limit,
    ("verify", "closed-forms"): _verify,
}


def run(cfg: RunConfig) -> SummaryReport:
    """Execute every selected check, writing data files into ``cfg.out``."""
    r = _Run(cfg)
    for check in cfg.checks():
        RUNNERS[(cfg.command, check)](r)
    return r.report

