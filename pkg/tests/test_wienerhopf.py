import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from ghawkes import GammaKernel, HawkesModel, LinkSpec, mean_intensity_linear, simulate_burned
from ghawkes.analyze import integrated_kernel_matrix
from ghawkes.errors import InstabilityError, ModelError, NumericError
from ghawkes.estimate import default_grid, estimate_cross_cov
from ghawkes.keys import RandomKey
from ghawkes.wienerhopf import GridCurveSet, default_step, wh_forward, wh_recover


def scalar_model(a=0.5, gamma=1.0, mu=1.0):
    return HawkesModel([mu], LinkSpec("linear"), {(0, 0): GammaKernel(a, gamma)})


def two_dim_model():
    k = {(0, 0): GammaKernel(0.2, 1.0), (0, 1): GammaKernel(0.3, 2.0), (1, 0): GammaKernel(0.1, 1.5)}
    return HawkesModel([1.0, 0.5], LinkSpec("linear"), k)


def fourier_cov(a, gamma, lam, d):
    """Covariance density of a 1-d linear Hawkes process from its spectrum."""
    def integrand(xi):
        w = a * gamma**2 / (gamma + 1j * xi) ** 2
        return (1.0 / abs(1.0 - w) ** 2 - 1.0)
    val, _ = quad(integrand, 0, np.inf, weight="cos", wvar=d, limlst=100) if d > 0 else quad(integrand, 0, np.inf)
    return lam * val / np.pi


def round_trip_error(model, step, max_lag=10.0):
    om = GridCurveSet.from_kernels(model, step, max_lag)
    lam = mean_intensity_linear(model.mu, integrated_kernel_matrix(model))
    fwd = wh_forward(om, lam)
    rec = wh_recover(fwd.curves, lam)
    return float(np.max(np.abs(rec.curves.values - om.values))), rec


class TestGridCurveSet:
    def test_shapes(self):
        om = GridCurveSet.from_kernels(scalar_model(), 0.5, 10.0)
        assert om.values.shape == (1, 1, 21) and om.grid[-1] == 10.0
        with pytest.raises(ModelError):
            GridCurveSet(0.5, 10.0, np.zeros((1, 1, 21)), "cov")
        with pytest.raises(ModelError):
            GridCurveSet.from_kernels(scalar_model(), 0.3, 1.0)

    def test_from_estimate_transposes_and_symmetrizes(self):
        class Est:
            delta_grid = np.linspace(-2, 2, 41)
            values = np.zeros((2, 2, 41))
        Est.values[0, 1] = np.exp(-(Est.delta_grid - 0.5) ** 2)
        Est.values[1, 0] = Est.values[0, 1][::-1]
        cov = GridCurveSet.from_cov_estimate(Est, 0.1, 2.0)
        # estimator curve (0, 1) is C_{1,0}
        assert np.allclose(cov.values[1, 0], Est.values[0, 1])
        assert np.allclose(cov.values[0, 1], cov.values[1, 0][::-1])
        assert cov.meta["max_asymmetry"] < 1e-12

    def test_default_step(self):
        assert default_step(scalar_model(gamma=2.0)) == (0.025, 5.0)


class TestForward:
    def test_zero(self):
        om = GridCurveSet(0.1, 1.0, np.zeros((2, 2, 11)), "omega")
        res = wh_forward(om, [1.0, 2.0])
        assert np.array_equal(res.curves.values, np.zeros((2, 2, 21)))

    def test_residual_and_shape(self):
        res = wh_forward(GridCurveSet.from_kernels(scalar_model(), 0.05, 10.0), [2.0])
        assert res.residual <= 1e-10
        v = res.curves.values[0, 0]
        m = res.curves.n_steps
        assert np.all(v[m:] > 0)
        assert np.all(np.diff(v[m + 40:]) < 0)
        assert np.array_equal(v, v[::-1])

    def test_matches_fourier_oracle(self):
        step = 0.025
        res = wh_forward(GridCurveSet.from_kernels(scalar_model(), step, 20.0), [2.0])
        grid = res.curves.grid
        for d in [0.0, 0.5, 1.0, 2.0, 5.0]:
            got = res.curves.values[0, 0][np.argmin(np.abs(grid - d))]
            assert got == pytest.approx(fourier_cov(0.5, 1.0, 2.0, d), abs=2e-3)

    def test_nonlinear_in_omega(self):
        om = GridCurveSet.from_kernels(scalar_model(a=0.3), 0.05, 10.0)
        om2 = GridCurveSet(om.step, om.max_lag, 2 * om.values, "omega")
        v1 = wh_forward(om, [1.0]).curves.values
        v2 = wh_forward(om2, [1.0]).curves.values
        assert np.max(np.abs(v2 - 2 * v1)) > 0.05

    def test_two_dim_symmetry(self):
        m = two_dim_model()
        res = wh_forward(GridCurveSet.from_kernels(m, 0.05, 8.0), [2.0, 1.5])
        v = res.curves.values
        assert np.allclose(v[0, 1], v[1, 0][::-1], atol=1e-14)
        assert res.residual <= 1e-10

    def test_unstable(self):
        om = GridCurveSet.from_kernels(scalar_model(a=1.2), 0.05, 20.0)
        with pytest.raises(InstabilityError):
            wh_forward(om, [1.0])

    def test_wrong_kind(self):
        with pytest.raises(ModelError):
            wh_forward(GridCurveSet(0.1, 1.0, np.zeros((1, 1, 21)), "cov"), [1.0])


class TestRecover:
    def test_zero(self):
        res = wh_recover(GridCurveSet(0.1, 1.0, np.zeros((2, 2, 21)), "cov"), [1.0, 1.0])
        assert np.array_equal(res.curves.values, np.zeros((2, 2, 11)))

    def test_round_trip_bound_and_rate(self):
        err1, rec = round_trip_error(scalar_model(), 0.05)
        err2, _ = round_trip_error(scalar_model(), 0.025)
        # sup |w'| = a gamma^2 = 0.5 at t = 0
        assert rec.residual <= 1e-8
        assert err1 <= 5 * 0.05 * 0.5
        assert err1 / err2 >= 1.8

    def test_round_trip_two_dim(self):
        err, rec = round_trip_error(two_dim_model(), 0.025, 8.0)
        assert rec.residual <= 1e-8
        assert err <= 5 * 0.025 * 0.3 * 4

    def test_lambda_must_be_positive(self):
        with pytest.raises(ModelError):
            wh_recover(GridCurveSet(0.1, 1.0, np.zeros((1, 1, 21)), "cov"), [0.0])

    def test_singular(self):
        with pytest.raises(NumericError):
            wh_recover(GridCurveSet(0.1, 1.0, np.full((1, 1, 21), np.nan), "cov"), [1.0])

    def test_condition_warning(self):
        # a covariance that nearly cancels the diagonal makes the system ill-conditioned
        m = 10
        vals = np.zeros((1, 1, 2 * m + 1))
        vals[0, 0, :] = -1.0 / (0.1 * m)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                res = wh_recover(GridCurveSet(0.1, 1.0, vals, "cov"), [1.0 + 1e-13])
            except NumericError:
                pytest.skip("system became exactly singular")
        assert res.warnings and any("condition" in str(w.message) for w in caught)

    def test_estimated_input(self):
        # pilot over seeds 0-4 gave L2 errors 0.044-0.052 at h=0.5, step 0.1
        model = scalar_model()
        stream = simulate_burned(model, 5000.0, 50.0, RandomKey(3, 0, 0, 0))
        est = estimate_cross_cov(stream, default_grid(0.5, 12.0), 0.5)
        rec = wh_recover(GridCurveSet.from_cov_estimate(est, 0.1, 10.0), est.lambda_hat)
        truth = GridCurveSet.from_kernels(model, 0.1, 10.0).values[0, 0]
        err = np.sqrt(np.trapezoid((rec.curves.values[0, 0] - truth) ** 2, rec.curves.grid))
        assert err <= 0.1
