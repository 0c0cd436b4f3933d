import math

import numpy as np
import pytest
from sklearn.base import clone

from icoswitch.exceptions import FitConvergenceError, InsufficientDataError
from icoswitch.fitting import (
    FringeFitter,
    ScalingFitter,
    binomial_weights,
    fit_fringe,
    fit_scaling,
    fringe_model,
)

N = np.arange(31)


def test_fringe_model_shapes():
    assert fringe_model(0, 0.1) == pytest.approx(0.0)
    assert fringe_model(N, 0.00647, nu=0.989).shape == (31,)
    assert fringe_model(1, math.pi / 2, model="cosine_squared") == pytest.approx(0.5)
    with pytest.raises(ValueError):
        fringe_model(1, 0.1, model="sine")


def test_binomial_weights_floor():
    w = binomial_weights([0.0, 0.5], [100, 100])
    assert w[0] == pytest.approx(4e4)
    assert w[1] == pytest.approx(400)


@pytest.mark.parametrize("truth", [
    (0.00647, 0.0, 0.0, 0.989),
    (0.00647, 0.03, -0.4, 0.95),
    (0.0031, -0.05, 0.9, 0.8),
])
def test_exact_recovery_cosine(truth):
    a, c, phi0, nu = truth
    y = fringe_model(N, a, c, phi0, nu)
    fit = fit_fringe(N, y, np.full(N.size, 1e4))
    assert fit.converged
    assert fit.a_fit == pytest.approx(a, abs=1e-6 * a)
    assert fit.nu_fit == pytest.approx(nu, abs=1e-6)
    assert fit.sse < 1e-12


def test_exact_recovery_cosine_squared():
    a, c, phi0, nu = 0.0032, 0.02, 0.3, 0.97
    y = fringe_model(N, a, c, phi0, nu, model="cosine_squared")
    fit = fit_fringe(N, y, np.full(N.size, 1e4), model="cosine_squared")
    assert fit.model == "cosine_squared"
    # cos^2 is pi-periodic, so only the phase modulo pi is identified
    pred = fringe_model(N, fit.a_fit, fit.c_fit, fit.phi0_fit, fit.nu_fit, "cosine_squared")
    assert np.max(np.abs(pred - y)) < 1e-6
    assert fit.a_fit == pytest.approx(a, rel=1e-6)


def test_fixed_visibility_and_no_nuisance():
    y = fringe_model(N, 0.00647, nu=0.989)
    fit = fit_fringe(N, y, np.full(N.size, 1e4), fix_nu=0.989, fit_nuisance=False)
    assert fit.nu_fixed and fit.nu_fit == 0.989
    assert fit.c_fit == 0.0 and fit.phi0_fit == 0.0
    assert fit.a_fit == pytest.approx(0.00647, rel=1e-8)


def test_noisy_fit_is_reasonable():
    rng = np.random.default_rng(1)
    shots = 60 * 30
    p = fringe_model(N, 0.00647, nu=0.989)
    y = rng.binomial(shots, p) / shots
    fit = fit_fringe(N, y, binomial_weights(y, np.full(N.size, shots)), fit_nuisance=False)
    assert fit.converged
    assert fit.a_fit == pytest.approx(0.00647, rel=0.02)


def test_convergence_failure_carries_best():
    y = fringe_model(N, 0.00647, nu=0.989) + 0.01 * np.sin(N)
    with pytest.raises(FitConvergenceError) as info:
        FringeFitter(grad_tol=0.0).fit(N, y, sample_weight=np.full(N.size, 100.0))
    best = info.value.best
    assert best is not None and not best.converged
    assert best.a_fit == pytest.approx(0.00647, rel=0.05)


def test_sklearn_api():
    fitter = FringeFitter(model="cosine", fix_nu=0.9)
    assert fitter.get_params()["fix_nu"] == 0.9
    twin = clone(fitter).set_params(fix_nu=None)
    y = fringe_model(N, 0.005, nu=0.9)
    twin.fit(N.reshape(-1, 1), y)
    assert np.allclose(twin.predict(N), y, atol=1e-7)
    assert twin.score(N, y) == pytest.approx(1.0)
    with pytest.raises(InsufficientDataError):
        FringeFitter().fit([1, 2, 3], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        FringeFitter(model="bad").fit(N, y)


@pytest.mark.parametrize("exponent", [-2.0, -1.0, -0.5])
def test_scaling_exact(exponent):
    ns = [5, 10, 15, 20, 25, 30]
    fit = fit_scaling({n: 3e-2 * n**exponent for n in ns})
    assert fit.exponent == pytest.approx(exponent, abs=1e-12)
    assert fit.prefactor == pytest.approx(3e-2)
    assert fit.n_used == tuple(ns)


def test_scaling_filter_and_errors():
    data = [(n, 1.0 / n) for n in range(1, 10)]
    assert fit_scaling(data, lambda n: n % 2 == 0).n_used == (2, 4, 6, 8)
    with pytest.raises(InsufficientDataError):
        fit_scaling(data, lambda n: n < 3)
    with pytest.raises(ValueError):
        ScalingFitter().fit([1, 2, 3], [1.0, 0.0, 1.0])
    assert ScalingFitter().fit([1, 2, 4], [1, 0.5, 0.25]).predict([8])[0] == pytest.approx(0.125)
