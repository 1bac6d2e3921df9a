"""Acceptance criteria, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from adamw_shampoo import theory
from adamw_shampoo.cli import cli_main
from adamw_shampoo.matfun import ExponentPair, fro_norm
from adamw_shampoo.optimizer import Hyperparams, init, step
from adamw_shampoo.oracles import ToyProblem, finite_diff_grad, quadratic_oracle
from adamw_shampoo.rng import make_rng
from adamw_shampoo.trace import read_trace_csv


def test_c1_update_bound(verdicts):
    t0 = time.perf_counter()
    rep = theory.verify_update_bound(trials=100, max_dim=8, steps=200, seed=0)
    dt = time.perf_counter() - t0
    ok = rep.violations == 0 and rep.trials == 100 * 200 and dt < 60
    verdicts.record("1 update-norm bound", ok,
                    f"{rep.violations} violations in {rep.trials} steps, max norm {2 - rep.worst_slack:.6f}, {dt:.1f}s")
    assert ok


def test_c2_weight_confinement(verdicts):
    t0 = time.perf_counter()
    rep = theory.verify_weight_confinement(trials=50, seed=0)
    dt = time.perf_counter() - t0
    applicable = 50 - rep.not_applicable
    ok = rep.violations == 0 and applicable == 50 and dt < 60
    verdicts.record("2 weight-decay confinement", ok,
                    f"{rep.violations} violations over {applicable} configurations ({rep.trials} checks, "
                    f"1/lambda checked in {rep.config['inverse_lambda_checked']}), {dt:.1f}s")
    assert ok


def test_c3_matrix_inequalities(verdicts):
    t0 = time.perf_counter()
    reps = [
        theory.verify_schatten_holder(500, 8, 0),
        theory.verify_matrix_cauchy_schwarz(500, 8, 0),
        theory.verify_trace_root_subadd(500, 8, 0),
        theory.verify_operator_monotone(500, 8, 0),
        theory.verify_operator_concave(500, 8, 0),
        theory.verify_agmg(1000, 0),
        theory.verify_norm_chain(500, 0),
        theory.verify_psd_nuclear_trace(500, 0),
    ]
    dt = time.perf_counter() - t0
    tol_ok = all(r.tolerance <= 1e-9 for r in reps)
    ok = all(r.violations == 0 for r in reps) and tol_ok and dt < 120
    detail = ", ".join(f"{r.name} {r.violations}" for r in reps)
    verdicts.record("3 matrix inequalities", ok, f"violations: {detail}; {dt:.1f}s")
    assert ok


def test_c4_gaussian_covariance(verdicts):
    t0 = time.perf_counter()
    reps = [
        theory.verify_gaussian_covariance(d, d, mu, xi, samples=10**5, seed=0)
        for d in (2, 4, 8)
        for mu, xi in ((0.0, 1.0), (1.0, 1.0), (2.0, 0.5))
    ]
    dt = time.perf_counter() - t0
    worst = min(min(r.config["left_margin_se"], r.config["right_margin_se"]) for r in reps)
    ok = all(r.violations == 0 and r.tolerance == 5.0 for r in reps) and dt < 60
    verdicts.record("4 Gaussian covariance", ok,
                    f"9 configurations, worst lambda_min margin {worst:.2f} SE, {dt:.1f}s")
    assert ok


def test_c5_weight_decay_sweep(verdicts, tmp_path):
    t0 = time.perf_counter()
    code = cli_main(["repro-fig5", "--steps", "1000000", "--seed", "0", "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    final = {}
    avg = {}
    for lam, tag in ((1e-1, "lam_0.1"), (1e-2, "lam_0.01"), (1e-3, "lam_0.001"), (1e-4, "lam_0.0001"), (0.0, "lam_0")):
        recs = read_trace_csv(tmp_path / f"{tag}.csv")
        assert recs[-1].k == 10**6
        final[lam] = recs[-1].dist_to_opt
        if lam == 0.0:
            avg = {r.k: r.run_avg_grad_fro for r in recs}
    ratio = min(final[l] for l in (1e-1, 1e-2, 1e-3)) / max(final[l] for l in (1e-4, 0.0))
    decay = avg[10**6] / avg[1000]
    svgs = (tmp_path / "fig5_avg_grad.svg").exists() and (tmp_path / "fig5_dist.svg").exists()
    ok = code == 0 and ratio >= 10 and decay <= 0.1 and svgs and dt < 300
    dists = ", ".join(f"{l:g}: {d:.4g}" for l, d in final.items())
    verdicts.record("5 scaled weight-decay sweep", ok,
                    f"final dist {{{dists}}}; separation ratio {ratio:.3g} (need >= 10); "
                    f"lambda=0 avg ratio {decay:.3g} (need <= 0.1); {dt:.0f}s")
    assert ok


def test_c6_oracle_validity(verdicts):
    n = 10**5
    failures = []

    toy = ToyProblem()
    rng = make_rng(0, 6)
    for label, oracle, x in (
        ("toy", toy, toy.x1),
        ("quadratic", quadratic_oracle(3, 2, noise=0.5, seed=0), make_rng(1).standard_normal((3, 2))),
    ):
        draws = np.stack([oracle.sample_grad(x, rng) for _ in range(n)])
        se = draws.std(axis=0, ddof=1) / math.sqrt(n)
        z = np.abs(draws.mean(axis=0) - oracle.exact_grad(x)) / se
        if z.max() > 5:
            failures.append(f"{label} bias {z.max():.2f} SE")
        for _ in range(5):
            p = make_rng(2).standard_normal(oracle.shape) * 3 + rng.standard_normal(oracle.shape)
            err = np.abs(finite_diff_grad(oracle, p, h=1e-4) - oracle.exact_grad(p)).max()
            if err > 1e-6:
                failures.append(f"{label} finite difference {err:.2e}")
    worst = 0.0
    for _ in range(100):
        x, y = rng.standard_normal((2, 2, 2)) * 10
        worst = max(worst, abs(fro_norm(toy.exact_grad(x) - toy.exact_grad(y)) - 0.01 * fro_norm(x - y)))
    if worst > 1e-12:
        failures.append(f"smoothness identity off by {worst:.2e}")
    ok = not failures
    verdicts.record("6 oracle validity", ok, "; ".join(failures) or f"unbiased, finite differences, smoothness ({worst:.1e})")
    assert ok


def test_c7_scalar_trajectory(verdicts):
    worst = 0.0
    for pq in (ExponentPair(), ExponentPair(4, 4 / 3), ExponentPair(1, math.inf), ExponentPair(math.inf, 1)):
        h = Hyperparams(eta=1e-2, theta=0.99, beta=0.995, lam=0.1, eps=1e-10, pq=pq)
        rng = make_rng(7)
        x = m = l = r = 0.0
        x = 2.0
        s = init([[x]])
        inv_p, inv_q = 1 / pq.p, 1 / pq.q
        for _ in range(10**4):
            g = float(rng.standard_normal()) + 0.2
            m = h.theta * m + (1 - h.theta) * g
            l = h.beta * l + (1 - h.beta) * g * g
            r = h.beta * r + (1 - h.beta) * g * g
            x = (1 - h.lam * h.eta) * x - h.eta * m * (l + h.eps) ** (-0.5 * inv_p) * (r + h.eps) ** (-0.5 * inv_q)
            s, _ = step(s, [[g]], h, diagnostics=False)
            worst = max(worst, abs(s.x[0, 0] - x))
    ok = worst <= 1e-12
    verdicts.record("7 scalar trajectory equivalence", ok, f"max |difference| {worst:.2e} over 4 x 1e4 steps")
    assert ok


def test_c8_schedule_plugin(verdicts, capsys):
    code = cli_main(["schedule", "--K", "1e6", "--L", "1", "--gap", "1", "--sigma2", "1", "--gamma", "1",
                     "--m", "2", "--n", "2", "--tau", "1"])
    out = capsys.readouterr().out
    vals = {k: float(v) for k, v in (line.split(" = ") for line in out.splitlines() if " = " in line and "p, q" not in line)}
    ok = (code == 0 and vals["theta"] == 0.999 and vals["eta"] == 2.5e-4 and vals["eps"] == 0.25
          and 1.86e-6 <= vals["lambda_max"] <= 1.87e-6)
    verdicts.record("8 schedule plug-in", ok,
                    f"theta {vals['theta']:g}, eta {vals['eta']:g}, eps {vals['eps']:g}, lambda_max {vals['lambda_max']:.6g}")
    assert ok


def test_c9_determinism(verdicts, tmp_path, capsys):
    import json

    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "toy_paper", "steps": 3000, "hyper": "toy_paper", "seed": 11,
                               "sweep": [0.01, 0.0], "record_interval": 30}))
    same = []
    for i in (1, 2):
        assert cli_main(["run", "--config", str(cfg), "--lambda", "0.001", "--out", str(tmp_path / f"run{i}")]) == 0
        assert cli_main(["sweep", "--config", str(cfg), "--out", str(tmp_path / f"sweep{i}")]) == 0
        assert cli_main(["verify", "--trials", "20", "--seed", "5", "--out", str(tmp_path / f"verify{i}")]) == 0
    capsys.readouterr()
    files = ["run{}/trace.csv", "sweep{}/lam_0.01.csv", "sweep{}/lam_0.csv", "sweep{}/summary.csv",
             "verify{}/verify_report.json"]
    for f in files:
        same.append((tmp_path / f.format(1)).read_bytes() == (tmp_path / f.format(2)).read_bytes())
    ok = all(same)
    verdicts.record("9 determinism", ok, f"{sum(same)}/{len(same)} output files byte-identical across repeats")
    assert ok
