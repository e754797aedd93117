"""Command line front end: ``dualflow {check-coefficients,simulate,verify,dump-noise}``.

Exit codes: 0 all checks pass, 1 some check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import time
from pathlib import Path
from typing import List

import numpy as np

from .coefficients import (
    derivative_mismatch,
    dual_transform,
    feller_integral,
    monotone_step_condition,
)
from .config import ConfigError, RunConfig, load_config
from .duality_mc import (
    TestFunction,
    gronwall_bound_check,
    reflected_bm_expectation,
    siegmund_check,
    strong_error_bound_check,
    weak_error_identity_check,
    weak_rate_fit,
    zero_occupation_check,
    Z_THRESHOLD,
)
from .flow import MonotonicityError, default_initial_points, dual_flow, dual_motion, \
    em_absorbing_flow, reflected_motion
from .io import CheckResult, write_csv, write_dual_snapshot_csv, write_noise_csv, \
    write_report_csv, write_snapshot_csv, SNAPSHOT_HEADER
from .monotone_fn import InverseUndefinedError
from .noise import NoisePath, TimeGrid, refine_noise, sample_noise, stable_hash, time_reverse
from .properties import property_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualflow", description="Dual flows of Euler schemes on [0, inf).")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("-c", "--config", help="YAML run configuration")
        sp.add_argument("--seed", type=int, help="root seed (overrides mc.seed)")
        sp.add_argument("--samples", type=int, help="Monte Carlo samples (overrides mc.n_samples)")
        sp.add_argument("--workers", type=int, help="worker processes (overrides mc.workers)")
        sp.add_argument("--out", help="output file or directory")

    common(sub.add_parser("check-coefficients", help="check the standing coefficient conditions"))
    sp = sub.add_parser("simulate", help="dump forward, dual and reflected snapshots")
    common(sp)
    sp.add_argument("--zero-noise", action="store_true", help="replace all increments by 0")
    sp = sub.add_parser("verify", help="run the configured checks and write a CSV report")
    common(sp)
    sp.add_argument("--checks", help="comma-separated subset overriding check.checks")
    sp = sub.add_parser("dump-noise", help="write the seeded increments as CSV")
    common(sp)
    sp.add_argument("--reverse", action="store_true", help="dump the time-reversed path")
    sp.add_argument("--refine", type=int, default=0, help="bridge refinement levels")
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.mc.seed = args.seed
    if args.samples is not None:
        cfg.mc.n_samples = args.samples
    env = os.environ.get("DUALFLOW_WORKERS")
    if args.workers is not None:
        cfg.mc.workers = args.workers
    elif env:
        try:
            cfg.mc.workers = int(env)
        except ValueError:
            raise ConfigError(f"DUALFLOW_WORKERS must be an integer (got {env!r})") from None
    if getattr(args, "checks", None):
        cfg.check.checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    return cfg.validate()


def _grid(cfg):
    return TimeGrid(cfg.time.T, cfg.time.n)


def _points(cfg):
    return default_initial_points(cfg.grid.x_max, cfg.grid.grid_points, cfg.grid.min_point)


# ---------------------------------------------------------------------------
# check-coefficients


def cmd_check_coefficients(cfg: RunConfig, out=None) -> int:
    out = sys.stdout if out is None else out
    model = cfg.build_model()
    dt = cfg.time.T / cfg.time.n
    lines, ok = [], True

    def report(label, status, detail=""):
        nonlocal ok
        ok &= status != "fail"
        lines.append(f"{label}: {status}" + (f" ({detail})" if detail else ""))

    xs = np.geomspace(1e-8, 1e6, 2000)
    report("(i) sigma > 0 on (0, inf)", "pass" if np.all(model.sigma(xs) > 0) else "fail",
           "checked on a log grid")
    mm = derivative_mismatch(model)
    report("(ii) derivatives agree with finite differences", "pass" if mm < 1e-5 else "fail",
           f"max relative gap {mm:.3g}")
    big = np.geomspace(1.0, 1e6, 400)
    growth = max(float(np.max(np.abs(model.sigma_prime(big)))),
                 float(np.max(np.abs(model.drift_prime(big)))))
    report("(ii) first derivatives bounded on [1, inf)",
           "heuristic pass" if np.isfinite(growth) and growth < 1e6 else "heuristic fail",
           f"max |derivative| on [1, 1e6] = {growth:.3g}")
    for label, which in (("(iii) boundary integral", "original"),
                         ("(iv) boundary integral for the dual drift", "dual")):
        try:
            res = feller_integral(model, which)
            report(label, "pass" if res.finite else "fail",
                   f"value {res.value:.6g}" if res.finite else "diverges at 0+")
        except ValueError as exc:
            report(label, "fail", str(exc))
    cond = monotone_step_condition(model, dt)
    report(f"monotone Euler step condition (dt={dt:g})", "pass" if cond.holds else "fail",
           cond.reason)
    print(f"model: {model.describe()}", file=out)
    for line in lines:
        print(line, file=out)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# simulate


def _hat_noise(cfg, zero=False) -> NoisePath:
    grid = _grid(cfg)
    noise = sample_noise(grid, seed=cfg.mc.seed, stream_id=stable_hash("simulate"))
    if zero:
        noise = NoisePath(noise.k_lo, noise.k_hi, noise.h, np.zeros(noise.n), noise.seed,
                          noise.stream_id)
    return noise


def cmd_simulate(cfg: RunConfig, out_dir: Path, zero_noise=False) -> int:
    model = cfg.build_model()
    grid = _grid(cfg)
    pts = _points(cfg)
    hat = _hat_noise(cfg, zero_noise)
    flow = em_absorbing_flow(model, grid, pts, time_reverse(hat))
    dual = dual_flow(flow)
    incs = np.broadcast_to(hat.increments, (pts.size, hat.n))
    exact = dual_motion(model, pts, incs, grid.h, record=True)
    xs, _ = reflected_motion(dual_transform(model), pts, incs, grid.h, record=True)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_snapshot_csv(out_dir / "forward_snapshots.csv", flow)
    write_dual_snapshot_csv(out_dir / "dual_snapshots.csv", dual)

    def path_rows(paths):
        for l in range(paths.shape[1]):
            for y, v in zip(pts, paths[:, l]):
                yield (l, l * grid.h, y, v, bool(v == 0.0))

    write_csv(out_dir / "dual_motion.csv", SNAPSHOT_HEADER, path_rows(exact))
    write_csv(out_dir / "reflected_paths.csv", SNAPSHOT_HEADER, path_rows(xs))
    write_noise_csv(out_dir / "noise.csv", hat)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify


def _is_brownian(cfg):
    p = cfg.model.params
    return cfg.model.family == "constant" and p.get("b", 0.0) == 0.0


def run_checks(cfg: RunConfig) -> List[CheckResult]:
    model = cfg.build_model()
    grid = _grid(cfg)
    T, n, r = cfg.time.T, cfg.time.n, cfg.time.r
    N, seed, workers = cfg.mc.n_samples, cfg.mc.seed, cfg.mc.workers
    ck = cfg.check
    fixture = model.describe()
    f = TestFunction(ck.f_R)
    results = []
    for name in ck.checks:
        seed_c = (seed + stable_hash(name, fixture)) % 2 ** 63
        if name == "siegmund":
            scheme = "reference" if r > 0 else "coarse"
            for res in siegmund_check(model, ck.pairs, grid, N, seed_c, scheme=scheme, r=r,
                                      joint=ck.joint, workers=workers):
                results.append(CheckResult(
                    name, fixture, {"pairs": res.pairs, "T": T, "n": n, "r": r, "samples": N},
                    res.lhs.mean, res.rhs.mean,
                    math.hypot(res.lhs.std_err, res.rhs.std_err), res.z, res.passed))
        elif name == "weak_identity":
            rep = weak_error_identity_check(model, f, ck.x, T, n, N, seed_c, r=r, workers=workers)
            results.append(CheckResult(
                name, fixture, {"x": ck.x, "T": T, "n": n, "r": r, "R": ck.f_R, "samples": N,
                                "conditional_on_hypotheses": rep.conditional},
                rep.lhs.mean, rep.rhs.mean, rep.std_err, rep.z, rep.passed))
        elif name == "weak_rate":
            exact = None
            if _is_brownian(cfg):
                s = float(cfg.model.params.get("sigma", 1.0))
                exact = reflected_bm_expectation(f, ck.x, T * s * s)
            fit = weak_rate_fit(model, f, ck.x, T, ck.n_list, N, seed_c, r=r, exact=exact,
                                workers=workers)
            results.append(CheckResult(
                name, fixture, {"n_list": fit.n_list, "x": ck.x, "verdict": fit.verdict,
                                "ci": fit.ci, "errors": [e.mean for e in fit.errors],
                                "samples": N},
                fit.slope, -0.5, None, None, fit.passed))
        elif name in ("strong_bound", "gronwall"):
            if name == "strong_bound":
                rep = strong_error_bound_check(model, ck.K, T, n, N, seed_c, r=r,
                                               workers=workers)
            else:
                bps = ck.b_prime_sup
                if bps is None:
                    xs = np.geomspace(1e-6, 1e4, 4000)
                    bps = float(np.max(np.abs(model.drift_prime(xs))))
                rep = gronwall_bound_check(model, ck.K, T, n, bps, N, seed_c, r=r,
                                           workers=workers)
            frac = rep.violation_fraction
            se = math.sqrt(max(frac * (1 - frac), 0.0) / len(rep.lhs))
            params = {"K": ck.K, "T": T, "n": n, "r": r, "samples": N,
                      "mean_lhs": float(np.mean(rep.lhs)), "mean_rhs": float(np.mean(rep.rhs))}
            results.append(CheckResult(name + ":violation_fraction", fixture, params,
                                       frac, 0.01, se, None, rep.passed))
            if name == "gronwall":
                results.append(CheckResult(name + ":expectation", fixture, params,
                                           float(np.mean(rep.lhs)), float(np.mean(rep.rhs)),
                                           None, None, rep.expectation_holds))
        elif name == "zero_occupation":
            ests = []
            for mult in (1, 4, 16):
                g = TimeGrid(T, n * mult)
                est = zero_occupation_check(model, ck.t, g, N, seed_c, x0=ck.x0, workers=workers)
                ests.append(est)
                results.append(CheckResult(name, fixture, {"n": n * mult, "t": ck.t, "x0": ck.x0},
                                           est.mean, None, est.std_err, None, True))
            trend = all(b.mean <= a.mean + Z_THRESHOLD * math.hypot(a.std_err, b.std_err)
                        for a, b in zip(ests, ests[1:]))
            results.append(CheckResult(name + ":trend", fixture, {"n": [n, 4 * n, 16 * n]},
                                       ests[0].mean, ests[-1].mean, None, None, trend))
        elif name == "property_suite":
            res = property_suite(ck.property_pairs, seed, metric_pairs=max(ck.property_pairs // 4, 1))
            for prop, (count, bad) in res.items():
                results.append(CheckResult(f"property:{prop}", "random monotone pairs",
                                           {"pairs": count}, len(bad), 0, None, None, not bad))
    return results


def cmd_verify(cfg: RunConfig, out) -> int:
    results = run_checks(cfg)
    if out is None or out == "-":
        write_report_csv(sys.stdout, results)
    else:
        write_report_csv(out, results)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------
# dump-noise


def cmd_dump_noise(cfg: RunConfig, out, reverse=False, refine=0) -> int:
    noise = _hat_noise(cfg)
    if refine:
        noise = refine_noise(noise, refine)
    if reverse:
        noise = time_reverse(noise)
    write_noise_csv(sys.stdout if out in (None, "-") else out, noise)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"dualflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        if args.command == "check-coefficients":
            code = cmd_check_coefficients(cfg)
        elif args.command == "simulate":
            code = cmd_simulate(cfg, Path(args.out or "."), args.zero_noise)
        elif args.command == "verify":
            code = cmd_verify(cfg, args.out)
        else:
            if args.refine < 0:
                print("dualflow: --refine must be >= 0", file=sys.stderr)
                return EXIT_USAGE
            code = cmd_dump_noise(cfg, args.out, args.reverse, args.refine)
    except MonotonicityError as exc:
        print(f"dualflow: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except InverseUndefinedError as exc:
        print(f"dualflow: dual construction failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"dualflow {args.command}: {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
