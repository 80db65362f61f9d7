import numpy as np
import pytest
from sklearn.base import clone

from tvbar.barcode import BarCode
from tvbar.convolve import grid_convolve
from tvbar.energy import observation
from tvbar.estimators import OracleDeblurrer, PhaseFieldDeblurrer, check_signal
from tvbar.kernel import Kernel

Z = BarCode((0.3, 0.5, 0.6, 0.8))


def observed():
    return grid_convolve(Z, Kernel.hat(0.04), omega=0.1)


def test_get_params_and_clone():
    est = PhaseFieldDeblurrer(lam=500.0, sigma=0.04, epsilon=0.002, h=1e-3)
    params = est.get_params()
    assert params["lam"] == 500.0 and params["functional"] == "F2"
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(lam=10.0)
    assert est.lam == 10.0


def test_check_signal_array():
    f = observed()
    arr = np.column_stack([f.x, f.samples])
    sig = check_signal(arr)
    assert np.array_equal(sig.samples, f.samples)
    with pytest.raises(ValueError):
        check_signal(arr[:, :1])
    with pytest.raises(ValueError):
        check_signal(arr[::-1])


def test_phase_field_fit_predict():
    f = observed()
    est = PhaseFieldDeblurrer(lam=1000.0, sigma=0.04, epsilon=0.002, h=1e-3).fit(f)
    assert est.converged_
    code = est.predict()
    assert len(code) == len(Z)
    assert np.max(np.abs(np.subtract(code.interfaces, Z.interfaces))) < 0.025
    field = est.transform()
    assert field.shape == est.field_.samples.shape
    assert est.predict(f) is est.code_


def test_phase_field_needs_sizes():
    with pytest.raises(ValueError):
        PhaseFieldDeblurrer(functional="F2").fit(observed())
    with pytest.raises(ValueError):
        PhaseFieldDeblurrer(functional="F3", sigma=0.04).fit(observed())


def test_oracle_estimator():
    z = BarCode((0.3, 0.7))
    f = observation(z, 0.05)
    est = OracleDeblurrer(lam=60.0, sigma=0.05, grid_points=21, max_interfaces=4)
    assert est.fit(f).predict() == est.code_
    assert np.allclose(est.code_.interfaces, z.interfaces)
    assert est.score(f) == pytest.approx(-2.0, abs=1e-9)
    ind = est.transform()
    assert set(np.unique(ind)) <= {0.0, 1.0}
