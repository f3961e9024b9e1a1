import numpy as np
import pytest

from ghawkes import (GammaKernel, HawkesModel, InstabilityError, LinkSpec, build_block_model, build_omega,
                     check_assumptions, first_order_deviation_bound, mean_intensity_linear, neumann_intensity,
                     second_order_deviation_bound, spectral_radius, tail_matrix)
from ghawkes.analyze import (default_block_length, fit_tail, integrated_kernel_matrix, tail_curve, v1_parameter,
                             v2_heuristic)
from ghawkes.errors import NumericError


def counterexample(a=1.0 / 3.0):
    k = {(0, 0): GammaKernel(-2 * a, 1.0), (1, 1): GammaKernel(-2 * a, 1.0),
         (0, 1): GammaKernel(a, 1.0), (1, 0): GammaKernel(a, 1.0)}
    return HawkesModel([1.0, 1.0], LinkSpec("sigmoid"), k)


class TestOmega:
    def test_zero(self):
        m = HawkesModel([1.0, 1.0], LinkSpec("linear"), {})
        assert np.array_equal(build_omega(m), np.zeros((2, 2)))

    def test_scalar(self):
        m = HawkesModel([1.0], LinkSpec("linear"), {(0, 0): GammaKernel(0.5, 3.0)})
        assert build_omega(m).tolist() == [[0.5]]

    def test_orientation(self):
        m = HawkesModel([1.0, 1.0], LinkSpec("linear"), {(0, 1): GammaKernel(-0.4, 1.0)})
        om = build_omega(m)
        assert om[1, 0] == 0.4 and om[0, 1] == 0.0
        assert integrated_kernel_matrix(m)[1, 0] == -0.4

    def test_block_table(self):
        om = build_omega(build_block_model(20))
        assert om[0, 0] == 0.9 and om[4, 4] == 0.45
        assert om[1, 0] == 0.3 and om[2, 0] == 0.3 and om[3, 1] == 0.3 and om[3, 2] == 0.3
        assert om[1, 1] == 0.3 and om[1, 2] == 0.3 and om[2, 1] == 0.3 and om[3, 3] == 0.3
        assert om[4, 3] == 0.45 and om[8, 7] == 0.45
        assert np.count_nonzero(om) == 5 * 10 + 4

    def test_tail_matrix(self):
        m = build_block_model(8)
        om = build_omega(m)
        assert np.allclose(tail_matrix(m, 0.0), om, rtol=0, atol=0)
        prev = om
        for b in [0.5, 1, 2, 5, 10]:
            eta = tail_matrix(m, b)
            assert np.all(eta <= prev)
            prev = eta


class TestSpectralRadius:
    def test_zero(self):
        assert spectral_radius(np.zeros((3, 3))) == 0.0

    def test_two_by_two(self):
        assert spectral_radius([[0.2, 0.1], [0.1, 0.2]]) == pytest.approx(0.3, rel=1e-10)

    def test_block_model(self):
        assert spectral_radius(build_omega(build_block_model(20))) <= 0.9 + 1e-6

    @pytest.mark.parametrize("c", [0.3, 0.9])
    def test_scaled_stochastic(self, c, rng):
        for _ in range(5):
            n = int(rng.integers(2, 12))
            p = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5)
            p[np.arange(n), rng.integers(0, n, n)] += 0.1
            p /= p.sum(axis=1, keepdims=True)
            assert spectral_radius(c * p) == pytest.approx(c, rel=1e-9)

    def test_agrees_with_eigvals(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 15))
            m = rng.uniform(size=(n, n)) * (rng.uniform(size=(n, n)) < 0.3)
            want = np.max(np.abs(np.linalg.eigvals(m))) if n else 0
            assert spectral_radius(m) == pytest.approx(want, rel=1e-8, abs=1e-12)

    def test_periodic_matrix(self):
        # plain power iteration oscillates on this permutation matrix
        assert spectral_radius([[0, 0.5], [0.5, 0]]) == pytest.approx(0.5, rel=1e-12)

    def test_row_sum_dominates(self, rng):
        for _ in range(20):
            m = rng.uniform(size=(6, 6)) * (rng.uniform(size=(6, 6)) < 0.4)
            assert spectral_radius(m) <= m.sum(axis=1).max() + 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            spectral_radius(np.ones((2, 3)))
        with pytest.raises(ValueError):
            spectral_radius([[-1.0]])
        with pytest.raises(ValueError):
            spectral_radius([[np.nan]])

    def test_non_convergence_reports(self):
        m = np.array([[1.0, 1e-9], [1e-9, 1.0]]) + np.diag([0, 1e-12])
        with pytest.raises(NumericError, match="residual"):
            spectral_radius(m, tol=1e-300, max_iter=5)


class TestAssumptions:
    def test_zero_kernel(self):
        rep = check_assumptions(HawkesModel([1.0], LinkSpec("sigmoid"), {}))
        assert rep.gamma_omega == 0 and rep.rho_omega == 0
        assert rep.tail_fit["exact_zero"]
        assert all(v.passed for v in rep.verdicts.values())

    def test_block_model(self):
        rep = check_assumptions(build_block_model(20))
        assert rep.gamma_omega <= 0.9 + 1e-6 and rep.rho_omega <= 0.9 + 1e-6
        assert rep.tail_fit["r"] == 1.0
        assert rep.phi_max == 1.0
        assert not rep.hard_failure
        assert all(v.passed for v in rep.verdicts.values())

    def test_counterexample(self):
        rep = check_assumptions(counterexample())
        assert rep.gamma_omega == pytest.approx(1.0, abs=1e-9)
        assert not rep.verdicts["spectral_radius"].passed
        assert rep.hard_failure

    def test_unbounded_link_verdict(self):
        m = HawkesModel([1.0], LinkSpec("linear"), {(0, 0): GammaKernel(0.5, 1.0)})
        rep = check_assumptions(m)
        assert rep.phi_max is None
        assert not rep.verdicts["bounded"].passed
        assert not rep.hard_failure
        assert check_assumptions(m, strict=True).hard_failure

    def test_report_serializes(self):
        rep = check_assumptions(build_block_model(8))
        d = rep.to_dict()
        assert set(d["verdicts"]) == {"spectral_radius", "tail_decay", "row_sum", "bounded"}
        assert "PASS" in rep.format()

    def test_tail_curve(self):
        m = build_block_model(8)
        b = np.array([0.0, 1.0, 3.0])
        tc = tail_curve(m, b)
        assert tc[0] == pytest.approx(0.9)
        assert tc[1] == pytest.approx(0.9 * 2 * np.exp(-1))

    def test_fit_tail_recovers_exponent(self):
        b = np.linspace(1, 20, 40)
        fit = fit_tail(b, 3.0 * np.exp(-0.7 * b))
        assert fit["r"] == 1.0
        assert fit["c1"] == pytest.approx(3.0) and fit["c2"] == pytest.approx(0.7)
        assert fit_tail(b, np.exp(-0.2 * b**2))["r"] == 2.0


class TestLinearIntensity:
    def test_zero(self):
        assert np.array_equal(mean_intensity_linear([1.0, 2.0], np.zeros((2, 2))), [1.0, 2.0])

    def test_two_by_two(self):
        lam = mean_intensity_linear([1, 1], [[0.2, 0.1], [0.1, 0.2]])
        assert np.allclose(lam, 10 / 7, rtol=1e-14)

    def test_scalar(self):
        assert mean_intensity_linear([1.0], [[0.5]]) == pytest.approx([2.0])

    def test_unstable(self):
        with pytest.raises(InstabilityError):
            mean_intensity_linear([1.0], [[1.0]])
        with pytest.raises(InstabilityError):
            neumann_intensity([1.0], [[1.2]], 3)

    def test_neumann(self):
        m = np.array([[0.2, 0.1], [0.1, 0.2]])
        assert np.array_equal(neumann_intensity([1, 1], m, 1), [1, 1])
        assert np.allclose(neumann_intensity([1, 1], m, 50), 10 / 7, atol=1e-10)
        exact = mean_intensity_linear([1, 1], m)
        for n in range(1, 30):
            err = np.linalg.norm(neumann_intensity([1, 1], m, n) - exact)
            assert err <= 0.3**n * np.sqrt(2) / 0.7 + 1e-15


class TestBounds:
    def test_zero(self):
        assert np.array_equal(first_order_deviation_bound(np.zeros((2, 2)), np.zeros((2, 2)), 1.0, 3.0, 1.0),
                              np.zeros(2))
        assert np.array_equal(second_order_deviation_bound(np.zeros((2, 2)), np.zeros((2, 2)), 1.0, 1.0, 3.0, 1.0),
                              np.zeros((2, 2)))

    def test_first_order_scalar(self):
        # n = 3: 2 * (0.5**3 + (1 + 0.5 + 0.25) * 0.1)
        assert first_order_deviation_bound([[0.5]], [[0.1]], 1.0, 2.0, 1.0)[0] == pytest.approx(0.6, rel=1e-15)

    def test_second_order_scalar(self):
        # n = 2: 2 (0.5**3 + (0.5 + 0.25) 0.1) + 2 (0.5**2 + 0.1 (0.5 + 0.25)) = 0.4 + 0.65
        val = second_order_deviation_bound([[0.5]], [[0.1]], 1.0, 1.0, 1.0, 1.0)[0, 0]
        assert val == pytest.approx(1.05, rel=1e-14)

    def test_second_order_matches_direct_sum(self, rng):
        om = rng.uniform(0, 0.2, (3, 3))
        eta = om * rng.uniform(0, 0.5, (3, 3))
        v1, v2, u, b = 0.7, 1.3, 3.5, 1.2
        n = int(np.floor(u / b + 1))
        J = np.ones((3, 1))
        P = np.linalg.matrix_power
        t1 = P(om, n + 1) @ J @ J.T + sum(P(om, i) @ eta @ J @ J.T for i in range(1, n + 1))
        t2 = J @ J.T @ P(om, n).T + sum(eta @ J @ J.T @ P(om, i).T for i in range(1, n + 1))
        want = 2 * v2 * t1 + 2 * v1**2 * t2
        assert np.allclose(second_order_deviation_bound(om, eta, v1, v2, u, b), want, rtol=1e-13)

    def test_monotone_scalar(self):
        f2 = first_order_deviation_bound([[0.5]], [[0.1]], 1.0, 2.0, 1.0)
        f8 = first_order_deviation_bound([[0.5]], [[0.1]], 1.0, 8.0, 1.0)
        s2 = second_order_deviation_bound([[0.5]], [[0.1]], 1.0, 1.0, 2.0, 1.0)
        s8 = second_order_deviation_bound([[0.5]], [[0.1]], 1.0, 1.0, 8.0, 1.0)
        assert np.all(f8 <= f2) and np.all(s8 <= s2)

    def test_monotone_block_when_tail_small(self):
        # nonincreasing in u requires eta(b) J <= (I - Omega) J; here b = 5 suffices
        m = build_block_model(8)
        om = build_omega(m)
        b = 5.0
        eta = tail_matrix(m, b)
        assert np.all(eta.sum(axis=1) <= 1 - om.sum(axis=1))
        prev = None
        for u in [0, 2, 4, 8, 16, 32]:
            cur = first_order_deviation_bound(om, eta, 1.0, u, b)
            if prev is not None:
                assert np.all(cur <= prev + 1e-15)
            prev = cur

    def test_default_block_length(self):
        assert default_block_length(8.0, 2.0, 0.9, 1.0, 1.0) == 2.0
        b = default_block_length(1e4, 1.0, 0.5, 1.0, 1.0)
        assert b == pytest.approx((np.log(2) * 1e4) ** 0.5)

    def test_v_parameters(self):
        m = build_block_model(4)
        assert v1_parameter(m, [0.1] * 4) == pytest.approx(1 / (1 + np.exp(-1)))
        assert v1_parameter(m, [0.9, 0.1, 0.1, 0.1]) == 0.9
        vals = np.zeros((2, 2, 5))
        vals[0, 1, 2] = -0.3
        assert v2_heuristic(vals, [1.0, 2.0]) == pytest.approx(2 * 4.0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            first_order_deviation_bound([[0.5]], [[0.1]], 1.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            first_order_deviation_bound([[0.5]], [[0.1]], 0.0, 1.0, 1.0)
