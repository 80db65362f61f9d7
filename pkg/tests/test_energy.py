import itertools
import json

import numpy as np
import pytest

from tvbar.barcode import BarCode, GeneratorConfig, generate, total_variation
from tvbar.convolve import GridSpec, grid_convolve, hat_convolve, sample
from tvbar.energy import (
    EnergyParams,
    dual_norm,
    evaluate,
    fidelity,
    observation,
    trivial_thresholds,
)
from tvbar.exceptions import EmptyBarCode, IncompatibleSignals
from tvbar.kernel import Kernel
from tvbar.piecewise import PiecewisePoly

Z_CE = BarCode((0.425, 0.575))
U_CE = BarCode((0.425, 0.4999, 0.5001, 0.575))


def test_params_invariants():
    assert EnergyParams("F1", 10, 0.1).rho == 0.0
    assert EnergyParams("F2", 10, 0.1).rho == 0.1
    with pytest.raises(ValueError):
        EnergyParams("F2", 10, 0.1, rho=0.2)
    with pytest.raises(ValueError):
        EnergyParams("F3", 10, 0.1)
    with pytest.raises(ValueError):
        EnergyParams("F1", -1, 0.1)
    with pytest.raises(ValueError):
        EnergyParams("F1", 1, float("inf"))


def test_f2_fidelity_vanishes_at_z():
    z = BarCode((0.2, 0.35, 0.5, 0.8))
    p = EnergyParams("F2", 123.0, 0.05)
    rep = evaluate(z, observation(z, 0.05), p)
    assert rep.fidelity == pytest.approx(0.0, abs=1e-14)
    assert rep.total == pytest.approx(total_variation(z), abs=1e-10)


def test_f1_empty_code_example():
    rep = evaluate(BarCode(()), observation(BarCode((0.0, 1.0)), 0.15), EnergyParams("F1", 7.0, 0.15))
    assert rep.fidelity == pytest.approx(0.93, abs=1e-12)
    assert rep.total == pytest.approx(0.93 * 7.0, abs=1e-10)


def test_counterexample_fidelities():
    p = EnergyParams("F3", 1e5, 0.06, rho=0.05)
    f = observation(Z_CE, 0.06)
    assert fidelity(U_CE, f, p) == pytest.approx(2.378e-4, rel=1e-2)
    assert fidelity(Z_CE, f, p) == pytest.approx(2.407e-4, rel=1e-2)


def test_report_json():
    rep = evaluate(Z_CE, observation(Z_CE, 0.06), EnergyParams("F3", 10.0, 0.06, 0.05))
    d = json.loads(rep.to_json())
    assert set(d) == {"tv", "fidelity", "lambda", "total", "functional", "sigma", "rho"}
    assert d["total"] == d["tv"] + d["lambda"] * d["fidelity"]


def test_lambda_scaling():
    f = observation(Z_CE, 0.06)
    for u in (Z_CE, U_CE, BarCode(())):
        a = evaluate(u, f, EnergyParams("F3", 50.0, 0.06, 0.05))
        b = evaluate(u, f, EnergyParams("F3", 100.0, 0.06, 0.05))
        assert a.tv_term == b.tv_term and a.fidelity == b.fidelity
        assert b.total - a.total == pytest.approx(50.0 * a.fidelity, rel=1e-12)


def test_f2_fidelity_zero_iff_equal():
    rng = np.random.default_rng(0)
    grid = np.round(np.linspace(0.1, 0.9, 17), 12)
    codes = [BarCode(tuple(sorted(rng.choice(grid, size=2 * k, replace=False)))) for k in (1, 2, 2, 3) for _ in range(5)]
    p = EnergyParams("F2", 1.0, 0.03)
    for z, u in itertools.product(codes[:8], codes):
        fid = fidelity(u, observation(z, 0.03), p)
        if u.interfaces == z.interfaces:
            assert fid < 1e-14
        else:
            assert fid > 1e-6


def test_grid_fidelity_agrees_with_exact():
    z = BarCode((0.3, 0.6))
    f = observation(z, 0.05)
    g = sample(f, GridSpec.covering(-0.1, 1.1, 1e-4))
    p = EnergyParams("F3", 1.0, 0.05, rho=0.04)
    u = BarCode((0.31, 0.62))
    assert fidelity(u, g, p) == pytest.approx(fidelity(u, f, p), abs=1e-8)


def test_incompatible_signals():
    z = BarCode((0.3, 0.6))
    p = EnergyParams("F2", 1.0, 0.05)
    with pytest.raises(IncompatibleSignals):
        fidelity(z, observation(z, 0.05), p, kernel=Kernel.gaussian(0.01))
    g = sample(observation(z, 0.05), GridSpec.covering(0.25, 0.65, 1e-3))
    with pytest.raises(IncompatibleSignals):
        fidelity(BarCode((0.1, 0.9)), g, p)


# dual norm ---------------------------------------------------------------------


def brute_dual_norm(f, lo, hi, n=801):
    """Largest |int f v| over v = +-chi_[a,b] / 2 with grid endpoints, the
    extreme points of the unit total-variation ball."""
    xs = np.linspace(lo, hi, n)
    F = np.concatenate([[0.0], np.cumsum(0.5 * (f(xs[1:]) + f(xs[:-1])) * np.diff(xs))])
    best = 0.0
    for i in range(n):
        seg = F[i:] - F[i]
        best = max(best, 0.5 * np.max(np.abs(seg)))
    return best


def test_dual_norm_examples():
    f = hat_convolve(BarCode((0.2, 0.8)), 0.1)
    assert dual_norm(f) == pytest.approx(0.3, abs=1e-14)
    assert dual_norm(f) == pytest.approx(brute_dual_norm(f, 0.0, 1.0), abs=1e-4)
    assert dual_norm(PiecewisePoly.zero()) == 0.0


def test_dual_norm_sign_changing():
    a = hat_convolve(BarCode((0.2, 0.4)), 0.05)
    b = hat_convolve(BarCode((0.6, 0.8)), 0.05)
    f = b - a
    assert dual_norm(f) == pytest.approx(brute_dual_norm(f, 0.0, 1.0), abs=1e-4)
    assert dual_norm(f) == pytest.approx(0.1, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_dual_norm_random_mixtures(seed):
    rng = np.random.default_rng(seed)
    codes = [generate(GeneratorConfig(0.05, max_bars=3, rng_seed=seed * 10 + k)) for k in range(3)]
    w = rng.uniform(-1, 1, size=3)
    f = w[0] * hat_convolve(codes[0], 0.02)
    for wk, ck in zip(w[1:], codes[1:]):
        f = f + wk * hat_convolve(ck, 0.02)
    assert dual_norm(f) == pytest.approx(brute_dual_norm(f, -0.05, 1.05, n=2001), abs=1e-4)


def test_dual_norm_grid_matches_exact():
    f = hat_convolve(BarCode((0.2, 0.4, 0.6, 0.8)), 0.05)
    g = sample(f - hat_convolve(BarCode((0.45, 0.55)), 0.05), GridSpec.covering(0, 1, 1e-4))
    exact = f - hat_convolve(BarCode((0.45, 0.55)), 0.05)
    assert dual_norm(g) == pytest.approx(dual_norm(exact), abs=1e-6)


# thresholds -------------------------------------------------------------------------


def test_threshold_examples():
    t = trivial_thresholds(BarCode((0.0, 1.0)), EnergyParams("F1", 1.0, 0.15))
    assert t.lambda_star == pytest.approx(1.0, abs=1e-12)
    assert t.lambda_0 == pytest.approx(2 / 0.93, abs=1e-12)
    assert t.lambda_0 == pytest.approx(2.15054, abs=1e-5)


def test_thresholds_ordered_for_random_codes():
    for seed in range(30):
        z = generate(GeneratorConfig(0.04, max_bars=6, rng_seed=seed))
        for p in (EnergyParams("F1", 1, 0.02), EnergyParams("F2", 1, 0.02), EnergyParams("F3", 1, 0.02, 0.01)):
            t = trivial_thresholds(z, p)
            assert t.lambda_star < t.lambda_0


def test_thresholds_empty():
    with pytest.raises(EmptyBarCode):
        trivial_thresholds(BarCode(()), EnergyParams("F1", 1, 0.1))


# first variation at local minima -----------------------------------------------------


def _descend(u, f, p, h, max_sweeps=400):
    """Move single interfaces by +-h while the energy decreases."""
    x = list(u.interfaces)
    best = fidelity(BarCode(tuple(x)), f, p)
    for _ in range(max_sweeps):
        moved = False
        for i in range(len(x)):
            for d in (h, -h):
                y = list(x)
                y[i] = round(y[i] + d, 12)
                try:
                    v = fidelity(BarCode(tuple(y)), f, p)
                except ValueError:
                    continue
                if v < best - 1e-15:
                    x, best, moved = y, v, True
                    break
        if not moved:
            return BarCode(tuple(x))
    raise AssertionError("coordinate descent did not settle")


def _perturbed_observation(z, sigma, shift):
    zs = BarCode(tuple(t + shift for t in z.interfaces))
    return hat_convolve(z, sigma) * 0.8 + hat_convolve(zs, sigma) * 0.2


def test_f1_first_variation():
    sigma, h = 0.04, 1e-4
    z = BarCode((0.2, 0.35, 0.5, 0.8))
    f = _perturbed_observation(z, sigma, 0.01)
    u = _descend(z, f, EnergyParams("F1", 1.0, sigma), h)
    assert u != z
    lip = 1.0 / sigma
    for x in u.interfaces:
        assert abs(float(f(x)) - 0.5) < 5 * h * lip


def _ubar(u, i):
    x = list(u.interfaces)
    drop = (x[i], x[i + 1]) if i % 2 == 0 else (x[i - 1], x[i])
    return BarCode(tuple(t for t in x if t not in drop))


def test_f3_first_variation():
    sigma, rho, h = 0.04, 0.03, 1e-4
    z = BarCode((0.2, 0.35, 0.5, 0.8))
    f = _perturbed_observation(z, sigma, 0.012)
    u = _descend(z, f, EnergyParams("F3", 1.0, sigma, rho), h)
    assert u != z
    g = f.convolve_hat(rho)
    # the first-variation residual is Lipschitz with constant at most 1/rho + 2/rho
    lip = 3.0 / rho
    for i, x in enumerate(u.interfaces):
        ub = _ubar(u, i)
        rhs = 0.5 + (0.0 if ub.is_empty() else float(hat_convolve(ub, rho).convolve_hat(rho)(x)))
        assert abs(float(g(x)) - rhs) < 5 * h * lip
