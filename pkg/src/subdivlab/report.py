"""Claim rows, summary reports and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

KINDS = ("equal", "upper_bound", "lower_bound")


@dataclass(frozen=True)
class Claim:
    """One quantitative check.

    ``equal`` passes when ``|observed - expected| <= tolerance``,
    ``upper_bound`` when ``observed <= expected + tolerance`` and
    ``lower_bound`` when ``observed >= expected - tolerance``.
    """

    name: str
    expected: float
    observed: float
    tolerance: float
    kind: str = "equal"
    passed: bool = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown claim kind {self.kind!r}")
        for k in ("expected", "observed", "tolerance"):
            object.__setattr__(self, k, float(getattr(self, k)))
        if self.passed is None:
            object.__setattr__(self, "passed", self.evaluate())
        else:
            object.__setattr__(self, "passed", bool(self.passed))

    def evaluate(self) -> bool:
        o, e, t = self.observed, self.expected, self.tolerance
        if math.isnan(o):
            return False
        if self.kind == "equal":
            return abs(o - e) <= t
        if self.kind == "upper_bound":
            return o <= e + t
        return o >= e - t

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "expected": _num(self.expected),
            "observed": _num(self.observed),
            "tolerance": _num(self.tolerance),
            "pass": self.passed,
        }


@dataclass
class SummaryReport:
    command: str
    config: dict
    claims: list[Claim] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    wall_clock_seconds: float | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def add(self, *claims: Claim) -> None:
        self.claims.extend(claims)

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "claims": [c.as_dict() for c in self.claims],
            "all_pass": self.passed,
            "wall_clock_seconds": self.wall_clock_seconds,
            "artifacts": list(self.artifacts),
        }


def _num(v: float):
    return None if (isinstance(v, float) and not math.isfinite(v)) else v


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False, allow_nan=False, default=_plain) + "\n"


CLAIM_COLUMNS = ("name", "kind", "expected", "observed", "tolerance", "pass")


def report_csv(report: SummaryReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CLAIM_COLUMNS)
    for c in report.claims:
        d = c.as_dict()
        w.writerow([d["name"], d["kind"], *(_fmt(d[k]) for k in ("expected", "observed", "tolerance")), str(c.passed).lower()])
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else repr(v)


def emit(report: SummaryReport, fmt: str, out: Path) -> Path:
    """Write ``report.json`` or ``report.csv`` into directory ``out``."""
    if fmt not in ("json", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"report.{fmt}"
    text = to_json(report.as_dict()) if fmt == "json" else report_csv(report)
    path.write_text(text, encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    """UTF-8 CSV with ``\\n`` line ends; floats written with ``repr`` so reruns match byte for byte."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return path


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(to_json(obj), encoding="utf-8")
    return path


def load_schema() -> dict:
    return json.loads(resources.files("subdivlab").joinpath("schemas/report.schema.json").read_text(encoding="utf-8"))
