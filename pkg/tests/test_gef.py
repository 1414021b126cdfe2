import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gefsplit import _fallback, fields, gef, kernels
from gefsplit.errors import OverflowRiskError, PreconditionError, SupportError

# damped series values for a fixed five-term coefficient vector, 30-digit reference
FSTAR_ZETA = np.array([1 + 0.5j, -0.3 + 2j, 0.7 - 1.1j, 0.4j, -1.2 + 0.1j])
FSTAR_ORACLE = [
    (0.3 - 0.7j, 1.3149514517707112 + 0.94505243682375728j),
    (2.5 + 1.0j, 0.0037257662219833117 - 0.2102447308413862j),
    (-4.0 + 3.0j, 0.00036460778971034212 + 0.00019753708984741517j),
]
BUMP_LAPLACIAN_SQ = 60.318578948924030  # int |Lap (1-|z|^2)^3|^2 over the unit disk
BUMP4_LAPLACIAN_SQ = 68.935518798770320


def coeffs_with_roots(roots):
    """Series coefficients of prod (z - root), rescaled by sqrt(k!)."""
    poly = np.poly(roots)[::-1]
    k = np.arange(poly.size)
    zeta = poly * np.sqrt([math.factorial(int(i)) for i in k])
    return gef.GefCoefficients(zeta.astype(complex), seed=0)


class TestSeries:
    @pytest.mark.parametrize("z,want", FSTAR_ORACLE)
    def test_fstar_matches_reference(self, z, want):
        got = gef.eval_fstar(gef.GefCoefficients(FSTAR_ZETA, 0), z)
        assert abs(got - want) < 1e-14 * max(1.0, abs(want)) + 1e-16

    @given(st.integers(0, 2**32), st.floats(0.0, 12.0), st.floats(0.0, 2 * np.pi))
    @settings(max_examples=40, deadline=None)
    def test_backends_agree(self, seed, radius, angle):
        c = gef.sample_gef(160, seed)
        z = np.array([radius * np.exp(1j * angle), 0.5 * radius + 0j])
        v1, d1 = _fallback.fstar_eval(c.zeta, z)
        v2, d2 = kernels.fstar_eval(np.ascontiguousarray(c.zeta), z)
        np.testing.assert_allclose(v1, v2, rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(d1, d2, rtol=1e-10, atol=1e-14)

    def test_overflow_guard(self):
        with pytest.raises(OverflowRiskError):
            gef.eval_fstar(gef.sample_gef(10, 0), 40.0)

    def test_sampling_is_reproducible(self):
        a = gef.sample_gef(50, seed=5, index=7).zeta
        b = gef.sample_gef(50, seed=5, index=7).zeta
        c = gef.sample_gef(50, seed=5, index=8).zeta
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_truncation_order_monotone_and_sufficient(self):
        from scipy import stats

        orders = [gef.truncation_order(r) for r in (1.0, 3.0, 6.0, 10.0)]
        assert orders == sorted(orders)
        assert stats.poisson.sf(orders[-1], 100.0) <= 1e-12 < stats.poisson.sf(orders[-1] - 1, 100.0)

    def test_field_variance_matches_euler_constant(self):
        # E log|xi| = -gamma/2 for standard complex xi, so X has mean zero
        vals = []
        lat = fields.Lattice(1.0, 2.0)
        for i in range(400):
            vals.append(gef.field_X(gef.sample_gef(60, 11, i), lat).values)
        x = np.concatenate([v.ravel() for v in vals])
        assert abs(np.mean(x)) < 4 * np.std(x) / np.sqrt(x.size / 2)
        assert np.var(x) == pytest.approx(np.pi**2 / 24, rel=0.1)


class TestZeros:
    def test_known_roots_recovered(self):
        roots = np.array([0.5, -1 + 1j, 2j, 3.0 - 0.5j])
        zs = gef.find_zeros(coeffs_with_roots(roots), 2.5, check_order=False)
        got = np.sort_complex(zs.zeros)
        want = np.sort_complex(roots[np.abs(roots) <= 2.5])
        np.testing.assert_allclose(got, want, atol=1e-10)
        assert zs.residual_winding_check == want.size

    def test_root_at_origin(self):
        zs = gef.find_zeros(coeffs_with_roots(np.array([0.0, 0.0, 1.5])), 2.0, check_order=False)
        assert zs.zeros.size == 3
        assert np.sum(np.abs(zs.zeros) < 1e-12) == 2

    def test_order_precondition(self):
        with pytest.raises(PreconditionError):
            gef.find_zeros(gef.sample_gef(20, 0), 6.0)

    @given(st.integers(0, 2**31))
    @settings(max_examples=25, deadline=None)
    def test_winding_agrees_with_roots(self, seed):
        radius = 4.0
        c = gef.sample_gef(gef.truncation_order(radius + 2.0), seed)
        zs = gef.find_zeros(c, radius)
        assert np.all(np.abs(zs.zeros) <= radius)
        vals = np.abs(gef.eval_fstar(c, zs.zeros)) if zs.zeros.size else np.zeros(0)
        assert np.all(vals < 1e-9)

    def test_mean_count_near_intensity(self):
        radius = 3.0
        counts = [gef.find_zeros(gef.sample_gef(gef.truncation_order(radius + 2), 21, i), radius).zeros.size
                  for i in range(400)]
        m, se = np.mean(counts), np.std(counts) / np.sqrt(len(counts))
        assert abs(m - radius**2) < 4 * se


class TestLinearStatistic:
    def test_bump_norms(self):
        h = gef.bump_test_function()
        assert h.norm_h_sq == pytest.approx(np.pi / 7, rel=1e-12)
        assert h.norm_lap_sq == pytest.approx(BUMP_LAPLACIAN_SQ, rel=1e-12)
        assert h.integral_h == pytest.approx(np.pi / 4, rel=1e-12)
        assert gef.bump_test_function("bump4").norm_lap_sq == pytest.approx(BUMP4_LAPLACIAN_SQ, rel=1e-12)

    def test_scaled_norms(self):
        h = gef.bump_test_function().scaled(3.0)
        assert h.norm_h_sq == pytest.approx(9 * np.pi / 7)
        assert h(0.0) == pytest.approx(3.0)

    def test_deviation_subtracts_mean(self):
        h = gef.bump_test_function()
        zs = gef.ZeroSet(np.array([0.0, 1.0, 2.0j]), 5.0, 3)
        res = gef.linear_statistic(zs, h, 2.0)
        want = 1.0 + (1 - 0.25) ** 3  # 2j sits on the edge of the support
        assert res.value == pytest.approx(want)
        assert res.deviation == pytest.approx(want - 4 / np.pi * np.pi / 4)

    def test_support_must_be_reliable(self):
        zs = gef.ZeroSet(np.zeros(0), 3.0, 0)
        with pytest.raises(SupportError):
            gef.linear_statistic(zs, gef.bump_test_function(), 4.0)

    def test_unknown_test_function(self):
        with pytest.raises(PreconditionError):
            gef.bump_test_function("wiggle")

    def test_test_functions_survive_pickling(self):
        import pickle

        h = gef.bump_test_function().scaled(2.0)
        back = pickle.loads(pickle.dumps(h))
        assert back.norm_lap_sq == h.norm_lap_sq
        assert back(0.5) == h(0.5)
