import math

import numpy as np
import pytest

from gefsplit import gef, results, stats
from gefsplit._seeding import child_seed, stream
from gefsplit.errors import PreconditionError

SIGMA_SQ = 0.0239141622519481463906  # zeta(3) / (16 pi)
SIGMA_X_SQ = 0.944093284040769731801  # pi zeta(3) / 4


def test_constants():
    k = stats.constants()
    assert k.sigma_sq == pytest.approx(SIGMA_SQ, rel=1e-14)
    assert k.sigma_x_sq == pytest.approx(SIGMA_X_SQ, rel=1e-14)
    assert k.sigma == pytest.approx(math.sqrt(SIGMA_SQ), rel=1e-14)


def test_child_seed_is_stable_and_distinct():
    assert child_seed(1, "variance") == child_seed(1, "variance")
    assert len({child_seed(1, "variance", i) for i in range(50)}) == 50
    assert child_seed(1, "variance") != child_seed(2, "variance")


class TestEstimators:
    def test_jackknife_of_mean_matches_classic_stderr(self):
        x = stream(3).standard_normal(5000)
        est, se = results.jackknife(np.mean, x)
        assert est == pytest.approx(x.mean())
        assert se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size), rel=0.25)

    def test_cgf_ratio_of_gaussian(self):
        r, v = 4.0, 2.5
        s = stream(5).standard_normal(400_000) * math.sqrt(v)
        lam = 0.1
        # symmetrizing in lambda cancels the sample-mean term of order mean / (r^2 lambda)
        sym = 0.5 * (stats.cgf_ratio(s, lam, r) + stats.cgf_ratio(s, -lam, r))
        assert sym == pytest.approx(v / (2 * r * r), rel=0.02)

    def test_small_lambda_budget(self):
        s = np.array([-4.0, 1.0, 2.0])
        assert stats.small_lambda(s, 2.0) == 0.5

    def test_clt_statistics_on_normal_sample(self):
        z = stream(8).standard_normal(20_000)
        out = stats.clt_statistics(z)
        assert abs(out["skewness"]) <= out["skewness_band"]
        assert abs(out["excess_kurtosis"]) <= out["kurtosis_band"]
        assert out["ks_distance"] < out["ks_band"]

    def test_tail_reference(self):
        p, rate = stats.tail_reference(1.0)
        assert p == pytest.approx(0.15865525393145705, rel=1e-14)
        assert rate == pytest.approx(math.log(p))

    def test_md_accepts_exact_gaussian_deviations(self):
        h = gef.bump_test_function()
        r = 8.0
        scale = stats.constants().sigma * math.sqrt(h.norm_lap_sq) / r
        dev = stream(12).standard_normal(100_000) * scale
        out = stats.md_experiment(r, h, samples=dev.size, deviations=dev)
        assert all(row["passed"] for row in out["rows"])

    def test_md_rejects_wrong_scale(self):
        h = gef.bump_test_function()
        scale = stats.constants().sigma * math.sqrt(h.norm_lap_sq) / 8.0
        dev = stream(12).standard_normal(100_000) * scale * 0.9
        out = stats.md_experiment(8.0, h, samples=dev.size, deviations=dev)
        assert not any(row["passed"] for row in out["rows"])

    def test_linear_response_on_gaussian_values(self):
        h = gef.bump_test_function()
        r = 6.0
        v = 2 * r * r * 0.5 * h.norm_h_sq * stats.constants().sigma_x_sq
        s = stream(4).standard_normal(20_000) * math.sqrt(v)
        res = stats.linear_response_experiment(r, h, samples=s.size, values=s)
        assert res.passed
        assert res.extra["lambda0_consistent"]


class TestSampling:
    def test_counts_reproducible_and_parallel_safe(self):
        a = stats.zero_counts(3.0, 12, seed=5, workers=1)
        b = stats.zero_counts(3.0, 12, seed=5, workers=2)
        np.testing.assert_array_equal(a, b)

    def test_start_offsets_continue_the_stream(self):
        h = gef.bump_test_function()
        whole = stats.zero_deviations(3.0, h, 10, seed=2)
        tail = stats.zero_deviations(3.0, h, 4, seed=2, start=6)
        np.testing.assert_array_equal(whole[6:], tail)

    def test_desk_radius_limit(self):
        with pytest.raises(PreconditionError):
            stats.zero_deviations(9.0, gef.bump_test_function(), 5)
        with pytest.raises(PreconditionError):
            stats.mean_count_experiment(radius=9.0, samples=10)

    def test_mean_count_small_run(self):
        res = stats.mean_count_experiment(radius=4.0, samples=600, seed=3)
        assert res.passed
        assert abs(res.estimate - 16.0) < 4 * res.stderr + 0.02 * 16

    def test_field_integral_matches_quadrature_mean(self):
        h = gef.bump_test_function()
        s, singular = stats.field_integrals(3.0, h, 200, seed=6)
        assert singular == 0
        assert abs(s.mean()) < 4 * s.std(ddof=1) / math.sqrt(s.size)

    def test_variance_experiment_reuses_deviations(self):
        h = gef.bump_test_function()
        dev = stats.zero_deviations(4.0, h, 300, seed=child_seed(1, "linear-statistic"))
        a = stats.variance_experiment(4.0, h, 300, seed=1, deviations=dev)
        b = stats.variance_experiment(4.0, h, 300, seed=1)
        assert a.estimate == b.estimate and a.stderr == b.stderr
