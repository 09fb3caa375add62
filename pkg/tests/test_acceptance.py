"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Runtime budgets are measured on the machine running the suite and asserted
alongside the numerical tolerances.
"""

import time

import numpy as np
import pytest

from apes.consistency import (
    appendix_a_check,
    continuous_dependence_experiment,
    epsilon_sweep,
    halfdomain_equivalence,
    random_perturbation,
    residual_convergence,
)
from apes.diagnostics import aux_invariant_residuals, compute_all
from apes.dynamics import Integrator, run
from apes.inequalities import check_inequality, constant_poly, empirical_constant, gronwall_oracle, random_gronwall_instance
from apes.monitors import GronwallInstance
from apes.state import Params, make_initial_data

from conftest import ACCEPTANCE_LINES

pytestmark = pytest.mark.slow


def report(n: int, ok: bool, detail: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. diagnostic exactness
# ---------------------------------------------------------------------------


def test_criterion_1_diagnostic_exactness():
    t0 = time.perf_counter()
    p = Params(nx=32, ny=32, nz=16, f0=1.0)
    worst = {}
    for seed in range(50):
        s = make_initial_data(p, seed=seed)
        res = aux_invariant_residuals(s, compute_all(s, p))
        for k, v in res.items():
            if k != "grid":
                worst[k] = max(worst.get(k, 0.0), v)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    report(1, top <= 1e-10 and elapsed < 30,
           f"max invariant residual {top:.2e} (<= 1e-10) over 50 states, {elapsed:.1f}s (< 30s)")


# ---------------------------------------------------------------------------
# 2. manufactured linear decay
# ---------------------------------------------------------------------------


def test_criterion_2_manufactured_decay():
    t0 = time.perf_counter()
    base = Params(nx=16, ny=16, nz=8, dt=1e-4, t_final=0.05, f0=0.0, epsilon=0.0,
                  init="manufactured", monitor_stride=50)
    shear = run(base.replace(amplitude=1.0, temperature_bound=0.0))
    err_v = max(abs(np.sqrt(r.l2_vT / shear.records[0].l2_vT) / np.exp(-4 * np.pi**2 * r.t) - 1)
                for r in shear.records)
    heat = run(base.replace(amplitude=0.0, temperature_bound=1.0))
    lam = (np.pi / base.h) ** 2
    err_T = max(abs(np.sqrt(r.l2_vT / heat.records[0].l2_vT) / np.exp(-lam * r.t) - 1)
                for r in heat.records)
    elapsed = time.perf_counter() - t0
    report(2, err_v <= 1e-4 and err_T <= 1e-2 and elapsed < 60,
           f"shear decay rel err {err_v:.2e} (<= 1e-4), heat mode rel err {err_T:.2e} (<= 1e-2), "
           f"{elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------------------
# 3-5. long runs at 48^2 x 24
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def long_runs():
    t0 = time.perf_counter()
    out = []
    for seed in range(5):
        for eps in (0.0, 1e-2):
            p = Params(nx=48, ny=48, nz=24, dt=5e-4, t_final=0.5, epsilon=eps, seed=seed,
                       monitor_stride=20)
            out.append((p, run(p, track_energy=True)))
    return out, time.perf_counter() - t0


def test_criterion_3_max_principle(long_runs):
    runs, elapsed = long_runs
    worst = max(max(r.max_T for r in res.records) / res.records[0].max_T - 1 for _, res in runs)
    report(3, worst <= 1e-6 and elapsed < 600,
           f"max_T(t)/max_T(0) - 1 = {worst:.2e} (<= 1e-6) over 10 runs, {elapsed:.0f}s (< 600s)")


def test_criterion_4_energy(long_runs):
    runs, _ = long_runs
    ratio = 0.0
    C = []
    for p, res in runs:
        t = np.array([r.t for r in res.records])
        e = np.array([r.l2_vT for r in res.records])
        ratio = max(ratio, float(np.max(e / (np.exp(2 * t) * e[0]))))
        C.append(np.max(np.abs(res.energy_imbalance)) / p.dt**2)
    # imbalance / dt^2 must stay bounded when the step is halved
    p0 = runs[0][0].replace(t_final=0.1)
    c_dt = []
    for dt in (p0.dt, p0.dt / 2):
        res = run(p0.replace(dt=dt), track_energy=True, monitor=False)
        c_dt.append(np.max(np.abs(res.energy_imbalance)) / dt**2)
    refine = c_dt[1] / c_dt[0]
    ok = ratio <= 1.0 + 1e-12 and np.all(np.isfinite(C)) and refine <= 1.2
    report(4, ok, f"max l2_vT(t)/(e^2t l2_vT(0)) = {ratio:.6f} (<= 1), "
                  f"C_scheme = max|imbalance|/dt^2 in [{min(C):.3f}, {max(C):.3f}], "
                  f"C(dt/2)/C(dt) = {refine:.3f} (<= 1.2)")


def test_criterion_5_sqrt_q(long_runs):
    runs, _ = long_runs
    worst = 0.0
    for _, res in runs:
        s = [max(r.lq_v[q] for r in res.records) for q in (8, 16, 32)]
        worst = max(worst, (max(s) - min(s)) / max(s))
    report(5, worst < 0.5, f"sup_t ||v||_q/sqrt(q) spread over q in {{8,16,32}} = {worst:.3f} (< 0.5)")


# ---------------------------------------------------------------------------
# 6-7. inequalities and Gronwall
# ---------------------------------------------------------------------------


def test_criterion_6_explicit_constants():
    t0 = time.perf_counter()
    worst = {name: empirical_constant(name, seed=2024, count=500)["max_ratio"]
             for name in ("ineqlad", "ineqlad1", "zt4", "ht4")}
    one = constant_poly(1.0)
    eq = check_inequality("ineqlad", [one, one, one]).ratio
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1 + 1e-6 and abs(eq - 1) <= 1e-10 and elapsed < 120
    detail = ", ".join(f"{k} {v:.4f}" for k, v in worst.items())
    report(6, ok, f"max ratios {detail} (<= 1+1e-6), ineqlad(1,1,1) = {eq:.12f}, {elapsed:.1f}s (< 120s)")


def test_criterion_7_gronwall():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    held = 0
    for _ in range(100):
        inst, beta = random_gronwall_instance(rng)
        held += gronwall_oracle(inst, B=lambda t, A, b=beta: b * A)["holds"]
    t = np.linspace(0, 2, 201)
    closed = gronwall_oracle(GronwallInstance(A0=0.0, times=t, ell=1.0, m=0, n=0, f=0, K=1, alpha=1))
    exact = np.allclose(closed["A"], np.e * (np.exp(t) - 1), rtol=1e-7)
    q_ok = np.allclose(closed["Q"], 1 + 2 * t, rtol=1e-12)
    elapsed = time.perf_counter() - t0
    ok = held == 100 and closed["holds"] and exact and q_ok and elapsed < 60
    report(7, ok, f"{held}/100 random instances hold, closed form holds={closed['holds']} "
                  f"A exact={exact} Q=1+2t={q_ok}, {elapsed:.1f}s (< 60s)")


# ---------------------------------------------------------------------------
# 8-11. consistency
# ---------------------------------------------------------------------------


def test_criterion_8_derived_equations():
    p = Params(nx=32, ny=32, nz=16, f0=1.0, epsilon=0.01)
    conv = residual_convergence(p, 0.01, (2e-4, 1e-4))
    ratios = next(iter(conv["ratios"].values()))
    spatial = max(appendix_a_check(make_initial_data(p, seed=s), p)[k + "_rel"]
                  for s in range(10) for k in ("eta", "theta", "u", "varphi", "psi"))
    ok = all(3.2 <= r <= 4.8 for r in ratios.values()) and spatial <= 1e-8
    detail = ", ".join(f"{k} {v:.3f}" for k, v in ratios.items())
    report(8, ok, f"dt->dt/2 residual ratios {detail} (4 +- 20%), "
                  f"spatial identity rel {spatial:.2e} (<= 1e-8)")


def test_criterion_9_reflection():
    p = Params(nx=32, ny=32, nz=16, f0=1.0, epsilon=0.01, dt=1e-3)
    res = halfdomain_equivalence(p, n_steps=100)
    report(9, res["max_discrepancy"] <= 1e-9,
           f"half vs restricted full max discrepancy {res['max_discrepancy']:.2e} (<= 1e-9) over 100 steps")


def test_criterion_10_continuous_dependence():
    p = Params(nx=32, ny=32, nz=16, f0=1.0, epsilon=0.01, dt=1e-3, monitor_stride=25)
    base = make_initial_data(p, seed=0)
    pert = random_perturbation(p, 1)
    a = continuous_dependence_experiment(p, 1e-6, 0.5, base=base, perturbation=pert)
    b = continuous_dependence_experiment(p, 5e-7, 0.5, base=base, perturbation=pert)
    quad = a.delta_l2 / b.delta_l2
    c = continuous_dependence_experiment(p.replace(dt=5e-4, monitor_stride=50), 1e-6, 0.5,
                                         base=base, perturbation=pert)
    drift = abs(c.growth_exponent - a.growth_exponent) / abs(a.growth_exponent)
    ok = np.all(np.abs(quad / 4 - 1) <= 0.1) and drift <= 0.2
    report(10, ok, f"delta_l2 ratio under delta halving in [{quad.min():.4f}, {quad.max():.4f}] (4 +- 10%), "
                   f"growth exponent {a.growth_exponent:.4f} vs {c.growth_exponent:.4f} at dt/2 "
                   f"(drift {drift:.2%} <= 20%)")


def test_criterion_11_epsilon_sweep():
    p = Params(nx=32, ny=32, nz=16, f0=1.0, dt=1e-3)
    res = epsilon_sweep(p, t_final=0.2)
    d = res["distance"]
    report(11, res["monotone"],
           "||(v_eps - v_0, T_eps - T_0)||_2(0.2): " + ", ".join(f"eps={k:g} {v:.3e}" for k, v in d.items())
           + " (decreasing in eps)")
