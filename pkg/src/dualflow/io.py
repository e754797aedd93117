"""CSV writers for snapshots, noise paths and check reports (17 significant digits)."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np

from .flow import DiscreteFlow, DualFlow
from .noise import NoisePath

__all__ = [
    "fmt",
    "CheckResult",
    "snapshot_rows",
    "dual_snapshot_rows",
    "noise_rows",
    "write_csv",
    "write_snapshot_csv",
    "write_dual_snapshot_csv",
    "write_noise_csv",
    "write_report_csv",
    "read_report_csv",
    "SNAPSHOT_HEADER",
    "NOISE_HEADER",
    "REPORT_HEADER",
]

SNAPSHOT_HEADER = ["step", "t", "y_initial", "value", "absorbed"]
NOISE_HEADER = ["k", "t", "dw"]
REPORT_HEADER = ["check", "fixture", "param_json", "lhs", "rhs", "std_err", "z", "pass"]

Target = Union[str, Path, io.TextIOBase]


def fmt(v) -> str:
    """Floats at 17 significant digits; ints and bools as text."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def write_csv(target: Target, header: List[str], rows: Iterable) -> None:
    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])

    if isinstance(target, (str, Path)):
        with open(target, "w", newline="") as fh:
            emit(fh)
    else:
        emit(target)


def snapshot_rows(flow: DiscreteFlow):
    h = flow.grid.h
    for l, row in zip(flow.steps, flow.values):
        for y, v in zip(flow.initial_points, row):
            yield (int(l), l * h, y, v, bool(v == 0.0))


def dual_snapshot_rows(dual: DualFlow, points=None):
    """Dual snapshots evaluated at ``points`` (default: the flow's initial points)."""
    pts = dual.initial_points if points is None else np.asarray(points, dtype=float)
    h = dual.grid.h
    for l, snap in enumerate(dual.snapshots):
        vals = np.asarray(snap(pts), dtype=float)
        for y, v in zip(pts, vals):
            yield (l, l * h, y, v, bool(v == 0.0))


def noise_rows(noise: NoisePath):
    for k, dw in zip(noise.indices(), noise.increments):
        yield (int(k), k * noise.h, dw)


def write_snapshot_csv(target: Target, flow: DiscreteFlow) -> None:
    write_csv(target, SNAPSHOT_HEADER, snapshot_rows(flow))


def write_dual_snapshot_csv(target: Target, dual: DualFlow, points=None) -> None:
    write_csv(target, SNAPSHOT_HEADER, dual_snapshot_rows(dual, points))


def write_noise_csv(target: Target, noise: NoisePath) -> None:
    write_csv(target, NOISE_HEADER, noise_rows(noise))


@dataclass
class CheckResult:
    """One row of a verification report."""

    check: str
    fixture: str
    params: dict = field(default_factory=dict)
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    std_err: Optional[float] = None
    z: Optional[float] = None
    passed: bool = False

    def row(self):
        def num(v):
            return "" if v is None or (isinstance(v, float) and math.isnan(v)) else fmt(v)

        return [self.check, self.fixture, json.dumps(self.params, sort_keys=True),
                num(self.lhs), num(self.rhs), num(self.std_err), num(self.z),
                "true" if self.passed else "false"]


def write_report_csv(target: Target, results: Iterable[CheckResult]) -> None:
    write_csv(target, REPORT_HEADER, (r.row() for r in results))


def read_report_csv(source: Target) -> List[dict]:
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return list(csv.DictReader(fh))
    return list(csv.DictReader(source))
