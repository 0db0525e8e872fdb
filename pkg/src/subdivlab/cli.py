"""Command-line front end: ``subdivlab {quad,bisector,subtriangle,verify}``.

Exit status is 0 when every claim passes, 1 when a claim fails (the report
is still written) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .core import DEFAULT_SEED, THREADS_ENV
from .experiments import CHECKS, DEFAULT_X_GRID, DEFAULT_Z_GRID, RunConfig, run
from .report import emit


def _reals(text: str) -> tuple[float, ...]:
    """``0.5,0.6,0.7`` or ``start:stop:count``."""
    try:
        if ":" in text:
            lo, hi, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            if n == 1:
                return (float(lo),)
            step = (float(hi) - float(lo)) / (n - 1)
            return tuple(float(lo) + k * step for k in range(n))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list or start:stop:count: {text!r}") from None


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subdivlab", description="Random geometric subdivision chains: simulations and checks.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, checks in CHECKS.items():
        s = sub.add_parser(name, help=f"{name} experiments")
        s.add_argument("--check", choices=("all", *checks), default="all", help="sub-experiment to run")
        s.add_argument("--seed", type=_seed, default=DEFAULT_SEED, help=f"root seed (default {DEFAULT_SEED})")
        s.add_argument("--steps", type=_positive, help="chain length (default depends on the check)")
        s.add_argument("--replicas", type=_positive, help="independent replicas or samples")
        s.add_argument("--bins", type=_positive, default=100, help="1-D angle histogram bins")
        s.add_argument("--resolution", type=_positive, default=50, help="ternary histogram resolution")
        s.add_argument("--x-grid", type=_reals, default=DEFAULT_X_GRID, help="x values for the normalization check")
        s.add_argument("--z-grid", type=_reals, default=DEFAULT_Z_GRID, help="z values for the tail check")
        s.add_argument("--out", type=Path, default=Path("out") / name, help="output directory")
        s.add_argument("--format", choices=("json", "csv"), default="json", help="summary report format")
        s.add_argument("--threads", type=_positive, help=f"worker threads (else ${THREADS_ENV}, else 1)")
        s.add_argument("--timing", action="store_true", help="record wall-clock seconds in the report")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        cfg = RunConfig(
            command=args.command, check=args.check, seed=args.seed, steps=args.steps, replicas=args.replicas,
            bins=args.bins, resolution=args.resolution, x_grid=args.x_grid, z_grid=args.z_grid,
            out=args.out, format=args.format, threads=args.threads, timing=args.timing,
        )
    except ValueError as e:
        print(f"subdivlab: error: {e}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    report = run(cfg)
    elapsed = time.perf_counter() - t0
    if cfg.timing:
        report.wall_clock_seconds = elapsed
    path = emit(report, cfg.format, cfg.out)
    for c in report.claims:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: observed {c.observed!r}, expected {c.expected!r} ({c.kind}, tol {c.tolerance!r})")
    print(f"report: {path}  ({elapsed:.2f} s)", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
