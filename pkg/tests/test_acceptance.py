"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

The phase-field runs (criteria 8 to 10) dominate the runtime; they are
computed once per session and shared.
"""
import functools
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from tvbar.barcode import BarCode, GeneratorConfig, generate, membership, x_dimension
from tvbar.certify import certify_F1, certify_F2, certify_F3
from tvbar.convolve import (
    appendix_A_closed_forms,
    double_convolve,
    grid_convolve,
    hat_convolve,
    quadrature_oracle,
)
from tvbar.energy import EnergyParams, evaluate, fidelity, observation, trivial_thresholds
from tvbar.kernel import J_value, Kernel, check_class_K, check_condition_J
from tvbar.oracle import SearchSpace, minimize
from tvbar.quadrature import integrate
from tvbar.solver import NoiseConfig, SolverConfig, add_noise, deblur

OMEGA = 0.0133
SEEDS = (1, 2, 3, 4, 5)


# 1 ----------------------------------------------------------------------------


def test_criterion_1_fsigma_norm(report_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_num = worst_exact = 0.0
    for _ in range(100):
        a = rng.uniform(0.0, 0.6)
        b = rng.uniform(a + 0.02, 1.0)
        s = rng.uniform(1e-3, (b - a) / 2)
        closed = b - a - 7 * s / 15
        f = hat_convolve(BarCode((a, b)), s)
        sq = lambda x: f(x) ** 2
        numeric = integrate(sq, a - s, b + s, [a, a + s, b - s, b], tol=1e-10)
        worst_num = max(worst_num, abs(numeric - closed))
        worst_exact = max(worst_exact, abs(f.norm_sq() - closed))
    elapsed = time.perf_counter() - t0
    ok = worst_num < 1e-6 and worst_exact < 1e-12 and elapsed < 5
    report_criterion(1, ok, f"numeric err {worst_num:.1e}, exact err {worst_exact:.1e}, {elapsed:.2f}s")
    assert ok


# 2 ----------------------------------------------------------------------------


def test_criterion_2_closed_forms_vs_quadrature(report_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    counts = {}
    for _ in range(20):
        big, small = sorted(rng.uniform(0.005, 0.05, size=2), reverse=True)
        N = rng.uniform(2 * big, 0.5)
        a = rng.uniform(big + small, 1 - N - big - small)
        for case, kw in (
            ("Ia", dict(rho=big, sigma=small)),
            ("Ib", dict(rho=small, sigma=big)),
            ("II_first", dict(rho=big)),
            ("IIa", dict(rho=big, sigma=small)),
            ("IIb", dict(rho=small, sigma=big)),
        ):
            closed = appendix_A_closed_forms(case, N=N, a=a, **kw)
            quad = quadrature_oracle(case, N=N, a=a, **kw)
            worst = max(worst, abs(closed - quad))
            counts[case] = counts.get(case, 0) + 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and min(counts.values()) >= 20 and elapsed < 60
    report_criterion(2, ok, f"{sum(counts.values())} integrals, worst err {worst:.1e}, {elapsed:.1f}s")
    assert ok


# 3 ----------------------------------------------------------------------------


def test_criterion_3_counterexample(report_criterion):
    z = BarCode((0.425, 0.575))
    u = BarCode((0.425, 0.4999, 0.5001, 0.575))
    p = EnergyParams("F3", 1e5, 0.06, rho=0.05)
    f = observation(z, 0.06)
    fz, fu = fidelity(z, f, p), fidelity(u, f, p)
    fid_ok = abs(fz / 2.407e-4 - 1) < 0.01 and abs(fu / 2.378e-4 - 1) < 0.01
    res = minimize(SearchSpace(5, 4, extra_candidates=(z, u)), f, p)
    prefers = res.minimizer != z and evaluate(u, f, p).total < evaluate(z, f, p).total
    crossover = 2.0 / (fz - fu)
    ok = fid_ok and prefers
    report_criterion(
        3, ok,
        f"fid(z)={fz:.4e} fid(u)={fu:.4e}; oracle at 1e5 returns {list(res.minimizer.interfaces)}; "
        f"competitor wins only for lambda > {crossover:.3g}",
    )
    assert fid_ok
    assert prefers, f"z is still optimal at lambda=1e5; the competitor wins for lambda > {crossover:.3g}"


# 4 ----------------------------------------------------------------------------


def test_criterion_4_trivial_threshold(report_criterion):
    failures = []
    n = 0
    for seed in range(20):
        z = generate(GeneratorConfig(0.06, max_bars=3, rng_seed=seed))
        f = observation(z, 0.03)
        space = SearchSpace(21, 4)
        for fn, rho in (("F1", None), ("F2", None), ("F3", 0.02)):
            p = EnergyParams(fn, 1.0, 0.03, rho)
            lam_star, lam_0 = trivial_thresholds(z, p)
            if not lam_star < lam_0:
                failures.append((seed, fn, "order"))
            for lam in (0.5 * lam_star, lam_star):
                n += 1
                if not minimize(space, f, p.with_lambda(lam)).minimizer.is_empty():
                    failures.append((seed, fn, lam))
    ok = not failures
    report_criterion(4, ok, f"{n} oracle runs at lambda <= lambda_star, failures {failures}")
    assert ok


# 5 ----------------------------------------------------------------------------


def _grid_code(rng, m, gap, n_bars):
    """Interfaces on grid indices, every width >= gap steps, kept gap steps from the ends."""
    for _ in range(1000):
        idx = np.sort(rng.choice(np.arange(gap, m - gap), size=2 * n_bars, replace=False))
        if np.all(np.diff(idx) >= gap):
            return idx
    raise RuntimeError("no code found")


def _instance(rng, functional):
    m = int(rng.choice([21, 25]))
    gap = int(rng.choice([2, 3]))
    # 2n interfaces with gaps >= gap must fit strictly inside the grid
    most = min(3, ((m - 1 - 2 * gap) // gap + 1) // 2)
    grid = np.linspace(0.0, 1.0, m)
    z = BarCode(tuple(grid[_grid_code(rng, m, gap, int(rng.integers(1, most + 1)))].tolist()))
    # widths on the grid carry rounding; omega is the actual narrowest width
    omega = min(x_dimension(z), z.interfaces[0], 1.0 - z.interfaces[-1])
    margin = rng.uniform(1.05, 3.0)
    if functional == "F1":
        sigma = rng.uniform(0.1, 1.0) * omega
        lam = margin * 2 / (omega - 2 * sigma / 3)
        cert, rho = certify_F1(omega, sigma, lam), None
    elif functional == "F2":
        sigma = rng.uniform(0.1, 0.5) * omega
        lam = margin * 2 / (omega - 21 * sigma / 15)
        cert, rho = certify_F2(omega, sigma, lam), None
    else:
        rho = rng.uniform(0.1, 0.5) * omega
        sigma = rng.uniform(0.3, 1.0) * rho
        bracket = (-sigma**3 + 5 * rho * sigma**2 + 17 * rho**3) / (15 * rho**2)
        lam = margin * 2 / (omega - bracket)
        cert = certify_F3(omega, sigma, rho, lam)
    return m, omega, z, EnergyParams(functional, lam, sigma, rho), cert


def test_criterion_5_theorem_validation(report_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    summary = {}
    bad = []
    for fn in ("F1", "F2", "F3"):
        done = 0
        while done < 50:
            m, omega, z, p, cert = _instance(rng, fn)
            if not cert.verdict or not membership(z, omega, (0, 0)):
                continue
            done += 1
            res = minimize(SearchSpace(m, 6), observation(z, p.sigma), p)
            if res.minimizer != z or res.ties:
                bad.append((fn, z.interfaces, p))
        summary[fn] = done
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 600
    report_criterion(5, ok, f"instances {summary}, mismatches {len(bad)}, {elapsed:.1f}s")
    assert ok, bad[:3]


# 6 ----------------------------------------------------------------------------


def test_criterion_6_hat_admissibility(report_criterion):
    k = Kernel.hat(0.1)
    taus = 0.1 * np.arange(1, 17) / 16
    cs = np.linspace(0.2, 1.0, 8)
    worst0 = max(abs(J_value(k, t, 0.0, c)) for t in taus for c in cs)
    rep = check_condition_J(k, tau_samples=taus, c_samples=cs)
    ok = check_class_K(k) and worst0 <= 1e-9 and rep.in_K3
    report_criterion(6, ok, f"max |J(sigma,tau,0,c)| = {worst0:.1e} on 16x8, in_K3 = {rep.in_K3}")
    assert ok


# 7 ----------------------------------------------------------------------------


def _half_crossings(f, lo, hi, n=6001):
    xs = np.linspace(lo, hi, n)
    v = f(xs) - 0.5
    out = []
    for i in range(n - 1):
        if v[i] == 0:
            out.append(xs[i])
        elif v[i] * v[i + 1] < 0:
            out.append(brentq(lambda t: float(f(t)) - 0.5, xs[i], xs[i + 1], xtol=1e-15))
    return np.asarray(out)


def test_criterion_7_level_sets(report_criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    count_ok = True
    omega = 0.04
    for seed in range(20):
        z = generate(GeneratorConfig(omega, max_bars=8, endpoint_values=(0, 0), rng_seed=seed))
        sigma = rng.uniform(0.05, 1.0) * omega
        rho, sigma2 = rng.uniform(0.05, 0.5, size=2) * omega
        iface = np.asarray(z.interfaces)
        for f in (hat_convolve(z, sigma), double_convolve(z, rho, sigma2)):
            roots = _half_crossings(f, -0.1, 1.1)
            if len(roots) != len(iface):
                count_ok = False
                continue
            worst = max(worst, float(np.max(np.abs(roots - iface))))
    ok = count_ok and worst < 1e-8
    report_criterion(7, ok, f"40 signals, crossing counts match {count_ok}, worst offset {worst:.1e}")
    assert ok


# 8 to 10: phase-field runs ------------------------------------------------------


@functools.lru_cache(maxsize=None)
def solver_run(seed, sigma_mult, rho_mult, lam, functional):
    sigma, rho = sigma_mult * OMEGA, rho_mult * OMEGA
    z = generate(GeneratorConfig(OMEGA, max_bars=20, endpoint_values=(0, 0), rng_seed=seed))
    kb, kd = Kernel.hat(sigma), Kernel.hat(rho)
    f = add_noise(grid_convolve(z, kb, omega=OMEGA), NoiseConfig(0.1, seed), OMEGA)
    cfg = SolverConfig(lam=lam, epsilon=4e-4, kernel_blur=kb, kernel_deblur=kd, omega=OMEGA)
    t0 = time.perf_counter()
    res = deblur(f, cfg)
    elapsed = time.perf_counter() - t0
    same = len(res.code) == len(z)
    dev = float(np.max(np.abs(np.subtract(res.code.interfaces, z.interfaces)))) if same else np.inf
    return dict(z=z, res=res, elapsed=elapsed, same_count=same, deviation=dev,
                recovered=same and dev <= OMEGA / 4, functional=functional)


def _runs_8():
    return [solver_run(s, m, m, 1000.0, "F2") for m in (1, 2) for s in SEEDS]


def _runs_9():
    return [solver_run(s, 2, 1, 10000.0, "F3") for s in SEEDS]


@pytest.mark.slow
def test_criterion_8_reconstruction(report_criterion):
    runs = _runs_8()
    rows = []
    for mult in (1, 2):
        sel = runs[:5] if mult == 1 else runs[5:]
        rows.append(
            f"sigma={mult}w: {sum(r['recovered'] for r in sel)}/5 recovered, "
            f"{sum(r['res'].converged for r in sel)}/5 steady, "
            f"max dev {max(r['deviation'] for r in sel) / OMEGA:.3f}w, "
            f"max time {max(r['elapsed'] for r in sel):.0f}s"
        )
    # a run stopped by max_steps has not reached a steady state
    ok = all(r["recovered"] and r["res"].converged and r["elapsed"] < 300 for r in runs)
    report_criterion(8, ok, "; ".join(rows))
    assert ok


@pytest.mark.slow
def test_criterion_9_large_lambda_degrades(report_criterion):
    runs = _runs_9()
    degraded = sum(not r["recovered"] for r in runs)
    detail = ", ".join(
        f"{len(r['res'].code)}/{len(r['z'])} ifaces" + ("" if not r["same_count"] else f" dev {r['deviation'] / OMEGA:.2f}w")
        for r in runs
    )
    ok = degraded > len(runs) / 2
    report_criterion(9, ok, f"{degraded}/5 degraded ({detail})")
    assert ok


@pytest.mark.slow
def test_criterion_10_energy_descent(report_criterion):
    runs = _runs_8() + _runs_9()
    bad = [i for i, r in enumerate(runs) if not r["res"].energy_monotone]
    checkpoints = sum(len(r["res"].energies) for r in runs)
    ok = not bad
    report_criterion(10, ok, f"{len(runs)} runs, {checkpoints} checkpoints, non-monotone runs {bad}")
    assert ok
