import io

import numpy as np
import pytest

from dualflow.config import ConfigError, RunConfig, dump_config, load_config
from dualflow.flow import default_initial_points, em_absorbing_flow
from dualflow.coefficients import constant
from dualflow.io import CheckResult, fmt, read_report_csv, write_noise_csv, write_report_csv, \
    write_snapshot_csv
from dualflow.noise import TimeGrid, sample_noise


def test_defaults_valid():
    cfg = load_config()
    assert cfg.time.n == 64 and cfg.model.family == "constant"


def test_roundtrip():
    cfg = load_config(text="time: {T: 2.0, n: 16}\nmc: {seed: 3}\n")
    again = load_config(text=dump_config(cfg))
    assert again.to_dict() == cfg.to_dict()


@pytest.mark.parametrize("text", [
    "time: {T: -1}",
    "mc: {n_samples: 0}",
    "grid: {grid_points: 0}",
    "bogus: {}",
    "time: {nope: 1}",
    "model: {family: unknown}",
    "model: {family: sqrt_diffusion, params: {a: -1}}",
    "check: {checks: [nothing]}",
    "check: {n_list: [4, 8, 12, 16]}",
    "check: {pairs: [[0.5, -1]]}",
    "- just a list",
    "time: {T: [",
])
def test_rejects(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


def test_fmt():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(None) == ""


def test_snapshot_csv_shape():
    g = TimeGrid(1.0, 4)
    pts = default_initial_points(1.0, 5)
    fl = em_absorbing_flow(constant(), g, pts, sample_noise(g, seed=1))
    buf = io.StringIO()
    write_snapshot_csv(buf, fl)
    lines = buf.getvalue().split("\n")
    assert lines[0] == "step,t,y_initial,value,absorbed"
    assert len(lines) == 1 + 5 * 5 + 1 and lines[-1] == ""
    assert "\r" not in buf.getvalue()


def test_noise_csv():
    buf = io.StringIO()
    n = sample_noise(TimeGrid(1.0, 3), seed=2)
    write_noise_csv(buf, n)
    rows = buf.getvalue().strip().split("\n")
    assert rows[0] == "k,t,dw" and len(rows) == 4
    assert float(rows[1].split(",")[2]) == n.increments[0]


def test_report_roundtrip():
    buf = io.StringIO()
    write_report_csv(buf, [CheckResult("siegmund", "bm", {"a": 1}, 0.5, 0.25, 0.1, 2.5, True),
                           CheckResult("x", "y", {}, None, float("nan"), None, None, False)])
    buf.seek(0)
    rows = read_report_csv(buf)
    assert rows[0]["pass"] == "true" and float(rows[0]["z"]) == 2.5
    assert rows[1]["lhs"] == "" and rows[1]["rhs"] == "" and rows[1]["pass"] == "false"
