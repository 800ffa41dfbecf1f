"""Acceptance criteria, one test per criterion.

Each test records a one-line PASS/FAIL verdict that is printed in the
terminal summary (see ``conftest.py``). Run on its own with

    python3 -m pytest tests/test_acceptance.py -v
"""

import math
import time

import numpy as np
import pytest
from scipy.special import eval_hermitenorm

from hermite_sde.baselines import euler_maruyama, generate_paths, mc_moments, milstein
from hermite_sde.hermite import eval_hermite_row
from hermite_sde.models import arctan_model, check_path_independence, cir_instance, custom, gbm, probe_grid
from hermite_sde.quadrature import build_rule, expect
from hermite_sde.solver import SolverConfig, evaluate, integrate, moments

SEED = 12345


class Criterion:
    def __init__(self, record_property, label, limit=None):
        self.record = record_property
        self.label = label
        self.limit = limit
        self.checks = []
        self.t0 = time.perf_counter()

    def check(self, ok, detail):
        self.checks.append((bool(ok), detail))

    def finish(self):
        elapsed = time.perf_counter() - self.t0
        if self.limit is not None:
            self.check(elapsed < self.limit, f"runtime {elapsed:.2f}s < {self.limit:g}s")
        ok = all(c for c, _ in self.checks)
        detail = "; ".join(d if c else f"NOT {d}" for c, d in self.checks)
        line = f"[{'PASS' if ok else 'FAIL'}] {self.label}: {detail}"
        self.record("acceptance", line)
        print(line)
        assert ok, line


def test_c1_hermite_identities(record_property):
    c = Criterion(record_property, "C1 Hermite identity suite (n <= 12, 100 samples)", limit=1.0)
    rng = np.random.default_rng(SEED)
    x = rng.uniform(-2.0, 2.0, 100)
    t = rng.uniform(0.2, 2.0, 100)
    N = 12
    r = eval_hermite_row(N + 1, x, t)
    n = np.arange(1, N + 1)[:, None]
    resid = (n + 1) * r[2:] - x * r[1:-1] + t * r[:-2]
    scale = np.maximum.reduce([np.abs((n + 1) * r[2:]), np.abs(x * r[1:-1]), np.abs(t * r[:-2])])
    c.check(np.all(np.abs(resid) <= 1e-12 * scale), f"recursion max rel {np.max(np.abs(resid) / scale):.1e}")
    ref = np.array([t ** (k / 2) / math.factorial(k) * eval_hermitenorm(k, x / np.sqrt(t)) for k in range(N + 1)])
    err = np.abs(r[: N + 1] - ref)
    c.check(np.all(err <= 1e-10 * np.abs(ref) + 1e-13), f"scaling identity max abs {err.max():.1e}")
    d = 1e-4
    up, dn = eval_hermite_row(N + 1, x + d, t), eval_hermite_row(N + 1, x - d, t)
    dx = (up[1:] - dn[1:]) / (2 * d)
    e_dx = np.abs(dx - r[:-1]).max()
    c.check(e_dx <= 1e-6, f"d/dx H_(n+1) = H_n max {e_dx:.1e}")
    tp, tm = eval_hermite_row(N, x, t + d), eval_hermite_row(N, x, t - d)
    ht = (tp - tm) / (2 * d)
    hxx = (up[: N + 1] - 2 * r[: N + 1] + dn[: N + 1]) / d**2
    e_heat = np.abs(ht + 0.5 * hxx).max()
    c.check(e_heat <= 1e-6, f"heat equation max {e_heat:.1e}")
    small = eval_hermite_row(N, x, 1e-12)
    mono = np.array([x**k / math.factorial(k) for k in range(N + 1)])
    e0 = np.abs(small - mono).max()
    c.check(e0 <= 1e-9, f"t -> 0 continuity max {e0:.1e}")
    c.finish()


def test_c2_orthogonality(record_property):
    c = Criterion(record_property, "C2 orthogonality (m, n <= 8)", limit=1.0)
    rule = build_rule(10)
    worst = 0.0
    for t in (0.1, 0.5, 1.0, 2.0):
        for m in range(9):
            for n in range(9):
                v = expect(lambda x: eval_hermite_row(8, x, t)[m] * eval_hermite_row(8, x, t)[n], t, rule)
                target = t**n / math.factorial(n) if m == n else 0.0
                worst = max(worst, abs(v - target))
    c.check(worst <= 1e-10, f"max |<H_m, H_n> - delta t^n/n!| = {worst:.1e}")
    c.finish()


def test_c3_gbm_oracle(record_property):
    c = Criterion(record_property, "C3 GBM coefficient oracle (N=5, M=100, T=1)", limit=10.0)
    T = 1.0
    w = np.linspace(-2 * math.sqrt(T), 2 * math.sqrt(T), 81)
    for mu in (0.0, 0.1, "sin(t)"):
        model = gbm(mu, 0.5, 1.0)
        sol = integrate(model.problem(T), SolverConfig(N=5, M=100))
        exact = model.exact_coefficients(sol.times, 5)
        coef = np.abs(sol.coefficients[-1] - exact[-1]).max()
        point = np.abs(evaluate(sol, w, -1) - model.exact(T, w)).max()
        c.check(coef <= 1e-3, f"mu={mu}: coef err at T {coef:.1e}")
        c.check(point <= 5e-3, f"mu={mu}: pointwise err at T {point:.1e}")
        # every node, with the startup proxy that resolves all initial orders
        seq = integrate(model.problem(T), SolverConfig(N=5, M=100, startup_proxy="sequential"))
        coef_all = np.abs(seq.coefficients - exact).max()
        point_all = max(np.abs(evaluate(seq, w, i) - model.exact(seq.times[i], w)).max() for i in range(101))
        c.check(coef_all <= 1e-3, f"mu={mu}: all-node coef err {coef_all:.1e}")
        c.check(point_all <= 5e-3, f"mu={mu}: all-node pointwise err {point_all:.1e}")
    c.finish()


def test_c4_cir_companion(record_property):
    c = Criterion(record_property, "C4 CIR instance via Langevin companion (N=5, M=80, T=2)", limit=10.0)
    model = cir_instance()
    T = 2.0
    # Monte Carlo check of the exact map on the direct square-root equation
    fine = generate_paths(SEED, 100_000, 400, T)
    res = milstein(model.problem(T), fine, keep_paths=False)
    mc = mc_moments(res)
    v = T / 16
    mean = (T + 1) * (1 + v)
    var = (T + 1) ** 2 * (1 + 6 * v + 3 * v**2) - mean**2
    c.check(abs(mc.mean - mean) <= 4 * mc.mean_stderr, f"MC mean {mc.mean:.4f} vs {mean:.4f}")
    c.check(abs(mc.variance - var) <= 4 * mc.variance_stderr, f"MC var {mc.variance:.4f} vs {var:.4f}")
    positive = np.all(model.companion.exact(fine.times, fine.W) > 0, axis=1)
    rms_fine = np.sqrt(np.mean((res.terminal - model.exact(T, fine.W[:, -1]))[positive] ** 2))
    coarse = fine.coarsen(5)
    res_c = milstein(model.problem(T), coarse, keep_paths=False)
    rms_coarse = np.sqrt(np.mean((res_c.terminal - model.exact(T, coarse.W[:, -1]))[positive] ** 2))
    c.check(rms_fine <= rms_coarse / 3, f"pathwise rms gap {rms_coarse:.1e} -> {rms_fine:.1e}")
    sol = integrate(model.companion.problem(T), SolverConfig(N=5, M=80))
    exact = model.companion.exact_coefficients(sol.times, 5)
    e01 = np.abs(sol.coefficients[:, :2] - exact[:, :2]).max()
    high = np.abs(sol.coefficients[:, 2:]).max()
    c.check(e01 <= 1e-3, f"a0, a1 err {e01:.1e}")
    c.check(high <= 1e-4, f"max |a_n|, n >= 2: {high:.1e}")
    c.finish()


def _arctan_errors(N, ens, model, T):
    sol = integrate(model.problem(T), SolverConfig(N=N, M=ens.steps))
    W = ens.W
    return max(np.abs(evaluate(sol, W[:, i], i) - model.exact(sol.times[i], W[:, i])).max()
               for i in range(ens.steps + 1))


def test_c5_arctan_ordering(record_property):
    c = Criterion(record_property, "C5 arctan (N=5, M=100, T=1, P=100)", limit=30.0)
    model = arctan_model(1.0, 0.0)
    T = 1.0
    ens = generate_paths(SEED, 100, 100, T)
    mil = milstein(model.problem(T), ens, gx=model.diffusion_dx)
    mil_err = np.abs(mil.trajectories - model.exact(ens.times, ens.W)).max()
    exp_err = _arctan_errors(5, ens, model, T)
    c.check(exp_err < mil_err, f"expansion max err {exp_err:.3e} < Milstein {mil_err:.3e}")
    errs = [_arctan_errors(N, ens, model, T) for N in (2, 4, 6)]
    c.check(errs[0] > errs[1] > errs[2], "max err N=2,4,6: " + ", ".join(f"{e:.3e}" for e in errs))
    c.finish()


def test_c6_parseval_moments(record_property):
    c = Criterion(record_property, "C6 Parseval moments vs Monte Carlo (P=1e5, N=8)", limit=60.0)
    T = 1.0
    ens = generate_paths(SEED, 100_000, 100, T)
    for model in (gbm(0.0, 0.5, 1.0), arctan_model(1.0, 0.0)):
        sol = integrate(model.problem(T), SolverConfig(N=8, M=100))
        mom = moments(sol, -1)
        mc = mc_moments(milstein(model.problem(T), ens, gx=model.diffusion_dx, keep_paths=False))
        zm = abs(mom.mean - mc.mean) / mc.mean_stderr
        zv = abs(mom.variance - mc.variance) / mc.variance_stderr
        c.check(zm <= 4, f"{model.name}: mean {mom.mean:.5f} vs MC {mc.mean:.5f} ({zm:.1f} SE)")
        c.check(zv <= 4, f"{model.name}: var {mom.variance:.5f} vs MC {mc.variance:.5f} ({zv:.1f} SE)")
    c.finish()


def test_c7_strong_orders(record_property):
    c = Criterion(record_property, "C7 strong orders on GBM (P=1e4)", limit=120.0)
    model = gbm(0.0, 0.5, 1.0)
    T = 1.0
    Ms = [50, 100, 200, 400]
    fine = generate_paths(SEED, 10_000, max(Ms), T)
    hs = T / np.asarray(Ms, dtype=float)
    for label, scheme, target in (("EM", euler_maruyama, 0.5), ("Milstein", milstein, 1.0)):
        errs = []
        for M in Ms:
            ens = fine.coarsen(max(Ms) // M)
            res = scheme(model.problem(T), ens, keep_paths=False)
            errs.append(math.sqrt(np.mean((res.terminal - model.exact(T, ens.W[:, -1])) ** 2)))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        c.check(abs(slope - target) <= 0.15, f"{label} slope {slope:.3f} (target {target})")
    c.finish()


def test_c8_path_independence_checker(record_property):
    c = Criterion(record_property, "C8 path-independence checker")
    cir = cir_instance()
    for model in (gbm("sin(t)", 0.5), cir, cir.companion, arctan_model(1.0, 0.0)):
        rep = check_path_independence(model.problem(2.0), probe_grid(model.probe_domain))
        c.check(rep.passed, f"{model.name} passes (max residual {rep.max_residual:.1e})")
    grid = probe_grid(((-2.0, 2.0), (0.1, 2.0)))
    rep = check_path_independence(custom("x", "t", 0.0).problem(2.0), grid)
    c.check(not rep.passed, "F=x, G=t fails")
    dev = np.abs(np.abs(rep.residuals) - np.abs(grid[:, 1] - 1.0)).max()
    c.check(dev <= 1e-6, f"|R| matches |t-1| to {dev:.1e}")
    c.finish()


def test_c9_table_excluded(record_property):
    line = "[N/A] C9 tabulated reference values: not an acceptance target; C3-C6 are the substitutes"
    record_property("acceptance", line)
    print(line)
