import importlib

import numpy as np
import pytest
from scipy import stats

from ghawkes import (AssumptionError, GammaKernel, HawkesModel, LinkSpec, ModelError, Phase, RandomKey,
                     UnsupportedConfigurationError, build_block_model, couple, deviation_profile, simulate,
                     simulate_burned)
from ghawkes.errors import NumericError
from ghawkes.simulate import default_burn_in

from conftest import linear_1d, poisson_model


class TestKeys:
    def test_pure_function_of_key(self):
        k = RandomKey(5, component=2, phase=Phase.POST_CUT_SHARED, replicate=7)
        assert np.array_equal(k.uniforms(100), RandomKey(5, 2, Phase.POST_CUT_SHARED, 7).uniforms(100))

    def test_prefix_stable(self):
        k = RandomKey(9)
        assert np.array_equal(k.uniforms(1000)[:10], k.uniforms(10))

    def test_distinct_keys_differ(self):
        base = RandomKey(1)
        draws = [base.uniforms(50)] + [base.with_(**ch).uniforms(50) for ch in
                                       ({"component": 1}, {"phase": Phase.PRE_CUT_COUPLED}, {"replicate": 1},
                                        {"master_seed": 2})]
        for i in range(len(draws)):
            for j in range(i + 1, len(draws)):
                assert not np.array_equal(draws[i], draws[j])

    def test_streams_look_independent(self):
        a = RandomKey(3, component=0).uniforms(20000)
        b = RandomKey(3, component=1).uniforms(20000)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.03
        assert stats.kstest(a, "uniform").pvalue > 0.001


class TestSimulate:
    def test_poisson_counts(self):
        s = simulate(poisson_model(3.0), 2000.0, RandomKey(1))
        rate = len(s) / 2000.0
        assert abs(rate - 3.0) <= 3 * np.sqrt(3.0 / 2000)
        bins = np.bincount(np.floor(s.times).astype(int), minlength=2000)[:2000]
        assert 0.9 <= bins.var() / bins.mean() <= 1.1

    def test_linear_fixed_point(self):
        s = simulate(linear_1d(1.0, 0.5, 2.0), 5000.0, RandomKey(2))
        assert len(s) / 5000.0 == pytest.approx(2.0, rel=0.05)

    def test_deterministic(self):
        m = build_block_model(8)
        a = simulate(m, 100.0, RandomKey(4))
        b = simulate(m, 100.0, RandomKey(4))
        assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)
        c = simulate(m, 100.0, RandomKey(5))
        assert not np.array_equal(a.times, c.times)

    def test_backends_bit_identical(self):
        pytest.importorskip("ghawkes._core")
        for model, T in [(build_block_model(8), 200.0), (linear_1d(), 300.0),
                         (HawkesModel([0.5, 0.2], LinkSpec("rectifier"),
                                      {(0, 1): GammaKernel(0.6, 1.0), (1, 0): GammaKernel(-0.5, 3.0),
                                       (1, 1): GammaKernel(0.3, 0.5)}), 300.0),
                         (HawkesModel([0.5], LinkSpec("capped-linear", 2.0), {(0, 0): GammaKernel(0.8, 1.0)}), 300.0)]:
            a = simulate(model, T, RandomKey(8), backend="cython")
            b = simulate(model, T, RandomKey(8), backend="python")
            assert len(a) > 0
            assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)

    def test_buffer_growth_keeps_result(self, monkeypatch, backend):
        # undersized first buffers force restarts; prefix-stable streams make them invisible
        sim = importlib.import_module("ghawkes.simulate")

        m = build_block_model(8)
        a = simulate(m, 200.0, RandomKey(6), backend=backend)
        monkeypatch.setattr(sim, "_rate_guess", lambda model: np.full(model.p, 1e-3))
        b = simulate(m, 200.0, RandomKey(6), backend=backend)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.marks, b.marks)

    def test_refresh_interval_does_not_change_law(self):
        m = build_block_model(4)
        rates = [[len(simulate(m, 100.0, RandomKey(r), refresh_interval=ri)) / 100.0 for r in range(30)]
                 for ri in (0.2, 5.0)]
        a, b = map(np.array, rates)
        se = np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        assert abs(a.mean() - b.mean()) < 4 * se

    def test_block_model_stationary_halves(self):
        m = build_block_model(20)
        first, second = [], []
        for r in range(20):
            s = simulate_burned(m, 200.0, default_burn_in(m), RandomKey(10, replicate=r))
            first.append(np.sum(s.times < 100.0) / 100.0)
            second.append(np.sum(s.times >= 100.0) / 100.0)
        d = np.array(first) - np.array(second)
        assert np.all(np.isfinite(first))
        assert abs(d.mean()) <= 3 * d.std(ddof=1) / np.sqrt(d.size)
        assert 0 < np.mean(first) / 20 < 1.0  # per-component rate below phi_max

    def test_unstable_model_rejected(self):
        m = HawkesModel([1.0], LinkSpec("linear"), {(0, 0): GammaKernel(1.2, 1.0)})
        with pytest.raises(AssumptionError):
            simulate(m, 10.0, RandomKey(1))
        with pytest.warns(RuntimeWarning):
            s = simulate(m, 5.0, RandomKey(1), allow_unstable=True)
        assert len(s) > 0

    def test_explosive_run_hits_event_budget(self):
        m = HawkesModel([1.0], LinkSpec("linear"), {(0, 0): GammaKernel(3.0, 1.0)})
        with pytest.warns(RuntimeWarning), pytest.raises(NumericError):
            simulate(m, 1000.0, RandomKey(1), allow_unstable=True, max_events=5000)

    def test_negative_linear_intensity_is_model_error(self):
        m = HawkesModel([0.2], LinkSpec("linear"), {(0, 0): GammaKernel(-0.9, 1.0)})
        with pytest.raises(ModelError):
            simulate(m, 200.0, RandomKey(1))

    def test_bad_horizon(self):
        with pytest.raises(ModelError):
            simulate(poisson_model(), 0.0, RandomKey(1))
        with pytest.raises(ModelError):
            simulate_burned(poisson_model(), 1.0, -1.0, RandomKey(1))


class TestBurnIn:
    def test_zero_burn_in_is_plain_simulation(self):
        m = build_block_model(8)
        a = simulate_burned(m, 50.0, 0.0, RandomKey(3))
        b = simulate(m, 50.0, RandomKey(3))
        assert np.array_equal(a.times, b.times)

    def test_times_within_horizon(self):
        s = simulate_burned(build_block_model(4), 30.0, 40.0, RandomKey(3))
        assert s.times.min() >= 0 and s.times.max() <= 30.0

    def test_first_vs_last_decile(self):
        m = linear_1d(1.0, 0.5, 2.0)
        T = 100.0
        first, last = [], []
        for r in range(200):
            s = simulate_burned(m, T, default_burn_in(m), RandomKey(21, replicate=r))
            first.append(np.sum(s.times < 0.1 * T))
            last.append(np.sum(s.times >= 0.9 * T))
        d = (np.array(first) - np.array(last)) / (0.1 * T)
        assert abs(d.mean()) <= 3 * d.std(ddof=1) / np.sqrt(d.size)

    def test_poisson_unaffected(self):
        m = poisson_model(2.0)
        a = [len(simulate_burned(m, 10.0, 0.0, RandomKey(2, replicate=r))) for r in range(300)]
        b = [len(simulate_burned(m, 10.0, 30.0, RandomKey(3, replicate=r))) for r in range(300)]
        assert stats.mannwhitneyu(a, b).pvalue > 0.01


class TestCouple:
    def test_zero_kernel_identical_after_cut(self):
        m = poisson_model(2.0, p=3, link="sigmoid")
        pair = couple(m, 20.0, 10.0, RandomKey(5))
        post_a = pair.original.restrict(10.0 + 1e-300, 20.0)
        post_b = pair.coupled.restrict(10.0 + 1e-300, 20.0)
        assert len(post_a) > 0
        assert np.array_equal(post_a.times, post_b.times) and np.array_equal(post_a.marks, post_b.marks)
        pre_a = pair.original.restrict(0.0, 10.0).times
        pre_b = pair.coupled.restrict(0.0, 10.0).times
        assert len(np.intersect1d(pre_a, pre_b)) == 0
        assert pair.shared_violations == 0

    def test_shared_stream_structural(self):
        pair = couple(build_block_model(8), 150.0, 50.0, RandomKey(6))
        assert pair.shared_violations == 0
        assert np.array_equal(pair.post_counts[0], pair.post_counts[1])
        assert np.array_equal(pair.post_checksums[0], pair.post_checksums[1])

    def test_backends_agree(self):
        pytest.importorskip("ghawkes._core")
        m = build_block_model(8)
        a = couple(m, 100.0, 40.0, RandomKey(2), backend="cython")
        b = couple(m, 100.0, 40.0, RandomKey(2), backend="python")
        assert np.array_equal(a.original.times, b.original.times)
        assert np.array_equal(a.coupled.times, b.coupled.times)

    def test_unbounded_link_rejected(self):
        with pytest.raises(UnsupportedConfigurationError, match="bounded"):
            couple(linear_1d(), 20.0, 10.0, RandomKey(1))

    def test_bad_cut(self):
        with pytest.raises(ModelError):
            couple(build_block_model(4), 20.0, 25.0, RandomKey(1))

    def test_marginal_counts_agree(self):
        m = build_block_model(4)
        a, b = [], []
        for r in range(200):
            pair = couple(m, 60.0, 20.0, RandomKey(9, replicate=r))
            a.append(pair.original.count(0, 20.0, 60.0))
            b.append(pair.coupled.count(0, 20.0, 60.0))
        assert stats.mannwhitneyu(a, b).pvalue > 0.01

    def test_pre_cut_independent_of_original(self):
        # before the cut the two processes use unrelated streams
        m = build_block_model(4)
        a, b = [], []
        for r in range(200):
            pair = couple(m, 30.0, 20.0, RandomKey(12, replicate=r))
            a.append(pair.original.count(0, 0.0, 20.0))
            b.append(pair.coupled.count(0, 0.0, 20.0))
        assert abs(stats.pearsonr(a, b)[0]) < 3 / np.sqrt(200)


class TestDeviationProfile:
    def test_zero_kernel_all_zero(self):
        prof = deviation_profile(poisson_model(1.0, p=2, link="sigmoid"), 30.0, 10.0, 1.0, 5, RandomKey(1))
        assert np.all(prof.mean == 0) and np.all(prof.se == 0)

    def test_needs_two_replicates(self):
        with pytest.raises(ModelError):
            deviation_profile(build_block_model(4), 30.0, 10.0, 1.0, 1, RandomKey(1))

    def test_decays(self):
        prof = deviation_profile(build_block_model(8), 80.0, 50.0, 1.0, 100, RandomKey(3))
        assert prof.pooled_mean[0] >= prof.pooled_mean[8] - 2 * prof.pooled_se[8]
        assert prof.raw.shape == (100, 8, 30)
        assert np.all(prof.offsets == np.arange(30))

    def test_workers_do_not_change_result(self):
        m = build_block_model(4)
        a = deviation_profile(m, 40.0, 20.0, 2.0, 6, RandomKey(3), workers=1)
        b = deviation_profile(m, 40.0, 20.0, 2.0, 6, RandomKey(3), workers=2)
        assert np.array_equal(a.raw, b.raw)
