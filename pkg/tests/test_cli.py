import csv
import filecmp
import subprocess
import sys
import time

import numpy as np
import pytest

from dualflow.cli import main


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def values(path, col="value"):
    with open(path, newline="") as fh:
        return np.array([float(r[col]) for r in csv.DictReader(fh)])


class TestCheckCoefficients:
    def test_brownian_passes(self, capsys):
        assert main(["check-coefficients"]) == 0
        out = capsys.readouterr().out
        assert "fail" not in out and out.count("pass") >= 5

    def test_sqrt_fails_boundary(self, tmp_path, capsys):
        cfg = write(tmp_path, "model: {family: sqrt_diffusion, params: {a: 1.0}}\n")
        assert main(["check-coefficients", "-c", cfg]) == 1
        out = capsys.readouterr().out
        line = [l for l in out.splitlines() if l.startswith("(iii)")][0]
        assert "fail" in line

    def test_negative_T(self, tmp_path):
        assert main(["check-coefficients", "-c", write(tmp_path, "time: {T: -1.0}\n")]) == 2

    def test_missing_config(self):
        assert main(["check-coefficients", "-c", "/nonexistent.yaml"]) == 2


class TestSimulate:
    CFG = "time: {T: 1.0, n: 16}\ngrid: {x_max: 3.0, grid_points: 300}\n"

    def test_zero_noise_identity(self, tmp_path):
        cfg = write(tmp_path, self.CFG)
        assert main(["simulate", "-c", cfg, "--zero-noise", "--out", str(tmp_path / "o")]) == 0
        for name in ("forward_snapshots", "dual_snapshots", "dual_motion", "reflected_paths"):
            f = tmp_path / "o" / f"{name}.csv"
            np.testing.assert_array_equal(values(f), values(f, "y_initial"))

    def test_deterministic(self, tmp_path):
        cfg = write(tmp_path, self.CFG)
        for d in ("a", "b"):
            assert main(["simulate", "-c", cfg, "--seed", "5", "--out", str(tmp_path / d)]) == 0
        for name in ("forward_snapshots", "dual_snapshots", "dual_motion", "reflected_paths",
                     "noise"):
            assert filecmp.cmp(tmp_path / "a" / f"{name}.csv", tmp_path / "b" / f"{name}.csv",
                               shallow=False)

    @pytest.mark.parametrize("b", [0.0, 0.5, -0.5])
    def test_dual_equals_reflected(self, tmp_path, b):
        cfg = write(tmp_path, self.CFG + f"model: {{family: constant, params: {{sigma: 1.0, b: {b}}}}}\n")
        out = tmp_path / "o"
        assert main(["simulate", "-c", cfg, "--out", str(out)]) == 0
        refl = values(out / "reflected_paths.csv")
        np.testing.assert_allclose(values(out / "dual_motion.csv"), refl, atol=1e-12)
        # grid-inverted snapshots agree up to the initial-grid spacing
        spacing = (3.0 - 1e-3) / 299
        assert np.max(np.abs(values(out / "dual_snapshots.csv") - refl)) <= spacing

    def test_monotonicity_violation(self, tmp_path, capsys):
        cfg = write(tmp_path, "model: {family: affine_affine, params: {alpha: 0.0, beta: 1.0, "
                              "gamma: -3.0, delta: 5.0}}\ntime: {T: 1.0, n: 1}\n")
        assert main(["simulate", "-c", cfg, "--out", str(tmp_path / "o")]) == 1
        assert "step" in capsys.readouterr().err


class TestVerify:
    def test_samples_zero(self):
        assert main(["verify", "--samples", "0"]) == 2

    def test_property_suite_default(self, tmp_path):
        out = tmp_path / "rep.csv"
        t0 = time.perf_counter()
        code = main(["verify", "--out", str(out)])
        assert time.perf_counter() - t0 < 60
        rows = {r["check"]: r for r in csv.DictReader(open(out))}
        for name in ("inverse_properties", "seesaw", "levy_le_sup", "sup_le_levy_interior",
                     "inverse_levy"):
            assert rows[f"property:{name}"]["pass"] == "true"
        # exit status follows the report; the stated edge forms have counterexamples
        assert code == (0 if all(r["pass"] == "true" for r in rows.values()) else 1)

    def test_worker_independent(self, tmp_path):
        cfg = write(tmp_path, "time: {T: 1.0, n: 8, r: 2}\nmc: {n_samples: 400, seed: 1}\n"
                              "check: {checks: [siegmund, weak_identity, zero_occupation], "
                              "pairs: [[0.5, 0.5]]}\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["verify", "-c", cfg, "--workers", "1", "--out", str(a)])
        main(["verify", "-c", cfg, "--workers", "2", "--out", str(b)])
        assert filecmp.cmp(a, b, shallow=False)

    def test_env_workers(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DUALFLOW_WORKERS", "zero")
        assert main(["verify"]) == 2


def test_dump_noise(tmp_path):
    out = tmp_path / "n.csv"
    assert main(["dump-noise", "--seed", "4", "--out", str(out), "--refine", "2"]) == 0
    assert len(values(out, "dw")) == 64 * 4
    assert main(["dump-noise", "--refine", "-1"]) == 2


def test_console_script_usage_error():
    r = subprocess.run([sys.executable, "-m", "dualflow.cli", "frobnicate"], capture_output=True)
    assert r.returncode == 2
