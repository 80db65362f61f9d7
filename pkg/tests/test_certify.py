import json

import numpy as np
import pytest

from tvbar.certify import (
    certify,
    certify_F1,
    certify_F2,
    certify_F3,
    f3_bracket,
    lemma_f,
    unified_condition,
)
from tvbar.exceptions import OutOfLemmaScope


def test_f1_examples():
    c = certify_F1(0.0133, 0.005, 1000)
    assert c.conditions[1].lhs == pytest.approx(2 / 3 * 0.005 + 0.002)
    assert c.verdict
    assert not certify_F1(0.0133, 0.02, 1000).verdict
    assert certify_F1(0.0133, 0.0, 1e12).verdict


def test_f2_examples():
    c = certify_F2(0.0133, 0.00665, 1000)
    assert c.conditions[-1].lhs == pytest.approx(0.01131)
    assert c.verdict
    c = certify_F2(0.0133, 0.00665, 400)
    assert c.conditions[-1].lhs == pytest.approx(0.01431)
    assert not c.verdict


def test_f2_lambda_boundary():
    omega = 0.05
    edge = 20 / (3 * omega)
    assert certify_F2(omega, omega / 2, edge * (1 + 1e-9)).verdict
    assert not certify_F2(omega, omega / 2, edge * (1 - 1e-9)).verdict


def test_f3_examples():
    c = certify_F3(0.0133, 0.00665, 0.00665, 1000)
    assert c.conditions[-1].lhs == pytest.approx(0.002 + 21 / 15 * 0.00665)
    assert c.verdict
    c = certify_F3(0.0133, 0.007, 0.00665, 1e6)
    assert not c.verdict
    assert not c.conditions[0].satisfied
    assert c.notes


def test_f3_matches_f2_on_diagonal():
    rng = np.random.default_rng(0)
    for _ in range(500):
        omega = rng.uniform(0.005, 0.1)
        sigma = rng.uniform(0.01, 0.6) * omega
        lam = 10 ** rng.uniform(1, 5)
        assert certify_F3(omega, sigma, sigma, lam).verdict == certify_F2(omega, sigma, lam).verdict
        assert f3_bracket(sigma, sigma) == pytest.approx(21 * sigma / 15)


def test_f3_lhs_monotone():
    rhos = np.linspace(0.001, 0.01, 40)
    for rho in rhos:
        sig = np.linspace(0.0005, rho, 40)
        vals = [f3_bracket(s, rho) for s in sig]
        assert np.all(np.diff(vals) >= -1e-15)
    for sigma in np.linspace(0.0005, 0.005, 20):
        rr = np.linspace(sigma, 0.02, 40)
        vals = [f3_bracket(sigma, r) for r in rr]
        assert np.all(np.diff(vals) >= -1e-15)


@pytest.mark.parametrize("fn", ["F1", "F2", "F3"])
def test_margin_changes_sign_once_along_lambda(fn):
    lams = np.logspace(0, 6, 400)
    m = np.array([certify(fn, 0.02, 0.004, lam, rho=0.006).conditions[-1].margin for lam in lams])
    assert np.count_nonzero(np.diff(np.sign(m)) != 0) == 1


def test_unified_condition_arithmetic():
    c = unified_condition(0.02, 0.004, 0.008, 2000)
    f = lemma_f(0.008, 0.004)
    assert f == pytest.approx((-0.004**3 + 5 * 0.008 * 0.004**2 + 10 * 0.008**3) / 0.008**2)
    assert f == pytest.approx(0.0890, abs=1e-4)
    assert c.conditions[0].lhs == pytest.approx(0.010667, abs=1e-6)
    assert c.verdict


def test_unified_condition_diagonal():
    for rho in (0.001, 0.004, 0.01):
        assert lemma_f(rho, rho) == pytest.approx(14 * rho)
        u = unified_condition(0.02, rho, rho, 500)
        assert u.conditions[0].lhs == pytest.approx(certify_F2(0.02, rho, 500).conditions[-1].lhs)


def test_unified_condition_scope():
    with pytest.raises(OutOfLemmaScope, match="degenerate"):
        unified_condition(0.02, 0.004, 0.0, 2000)
    with pytest.raises(OutOfLemmaScope):
        unified_condition(0.02, 0.011, 0.005, 2000)


def test_certificate_serialisation():
    c = certify_F2(0.0133, 0.00665, 400)
    d = json.loads(c.to_json())
    assert d["status"] == "outside proven regime"
    for cd, cond in zip(d["conditions"], c.conditions):
        assert cd["margin"] == cond.rhs - cond.lhs
    assert "verdict: outside proven regime" in c.table()


def test_certify_dispatch():
    with pytest.raises(ValueError):
        certify("F3", 0.02, 0.004, 100)
    with pytest.raises(ValueError):
        certify("F9", 0.02, 0.004, 100)
