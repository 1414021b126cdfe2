import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gefsplit import smeared
from gefsplit.errors import PreconditionError

E_LOG_ABS_REAL = -0.63518142273073908501  # E log|x| for x standard normal
E_LOG_ABS_COMPLEX = -0.28860783245076643030  # E log|z| for z standard complex


def test_centering_constants_match_reference():
    assert smeared.REAL_LOG_SHIFT == pytest.approx(-E_LOG_ABS_REAL, abs=1e-15)
    assert smeared.complex_log_psi().centering == pytest.approx(-E_LOG_ABS_COMPLEX, abs=1e-15)


@pytest.mark.parametrize("psi", [smeared.complex_log_psi(), smeared.real_log_psi(), smeared.real_half_log_psi()],
                         ids=lambda p: p.name)
def test_log_transforms_are_centred(psi):
    value, err = smeared.centering_check(psi)
    assert abs(value) < 1e-10 and err < 1e-8


def test_centering_detects_offset():
    shifted = smeared.real_log_psi()
    off = smeared.PsiSpec("shifted", "real", lambda x: shifted(x) + 0.1)
    value, _ = smeared.centering_check(off)
    assert value == pytest.approx(0.1, abs=1e-10)


class TestSmearedFunctional:
    def test_linear_transform_is_exact(self):
        psi = smeared.lipschitz_psi(lambda x: 2.0 * x, 2.0)
        for y in (0.01, 0.3, 1.0):
            assert smeared.g_of_y(psi, y).value == pytest.approx(2 * y, rel=1e-9)

    def test_lipschitz_bound(self):
        psi = smeared.lipschitz_psi(np.abs, 1.0)
        for y in (0.05, 0.5, 2.0):
            assert smeared.g_of_y(psi, y).value <= y * (1 + 1e-9)

    def test_even_in_y(self):
        psi = smeared.real_half_log_psi()
        a = smeared.g_of_y(psi, 0.3).value
        b = smeared.g_of_y(psi, -0.3).value
        assert a == pytest.approx(b, rel=1e-9)

    @pytest.mark.parametrize("m", [2.0, 4.0])
    def test_scaling_down_the_transform(self, m):
        # Jensen: log int exp(d/m) <= (1/m) log int exp(d) for every shift
        psi = smeared.real_half_log_psi()
        small = psi.scaled(1.0 / m)
        for y in (0.01, 0.2):
            assert smeared.g_of_y(small, y).value <= smeared.g_of_y(psi, y).value / m * (1 + 1e-6)

    def test_half_log_bounded(self):
        res = smeared.smeared_constant(smeared.real_half_log_psi(), 0.5)
        assert res.bounded and np.isfinite(res.constant)
        assert np.all(res.errors <= 0.01 * np.maximum(res.g, 1e-300))

    def test_full_log_on_the_line_diverges(self):
        gv = smeared.g_of_y(smeared.real_log_psi(), 0.1)
        assert gv.divergent and math.isinf(gv.value)
        assert smeared.smeared_constant(smeared.real_log_psi(), 1.0).verdict == "unbounded"

    def test_finer_shift_grid_barely_moves_the_sup(self):
        psi = smeared.real_half_log_psi()
        coarse = smeared.default_h_grid(1.0, "real")
        fine = np.linspace(coarse[0], coarse[-1], 2 * coarse.size - 1)
        a = smeared.g_of_y(psi, 0.05, h_grid=coarse).value
        b = smeared.g_of_y(psi, 0.05, h_grid=fine).value
        assert b >= a - 1e-12
        assert b == pytest.approx(a, rel=0.01)

    def test_grid_must_span_three_decades(self):
        with pytest.raises(PreconditionError):
            smeared.smeared_constant(smeared.real_half_log_psi(), 0.5, y_grid=np.logspace(-2, 0, 5))

    def test_csv_export(self, tmp_path):
        res = smeared.smeared_constant(smeared.real_half_log_psi(), 0.5)
        path = tmp_path / "g.csv"
        res.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "y,g,ratio" and len(lines) == res.y.size + 1


class TestNoisyLattice:
    EPS = math.sqrt(2) - 1

    def test_wide_lattice_is_noisy(self):
        res = smeared.noisy_gaussian_check(smeared.lattice_covariance("gef", 3.0, 5), self.EPS, 3.0)
        assert res.passed and res.size == 121

    def test_dense_lattice_is_not(self):
        res = smeared.noisy_gaussian_check(smeared.lattice_covariance("gef", 0.3, 5), self.EPS, 0.3)
        assert not res.passed

    @given(st.floats(0.5, 4.0), st.floats(0.05, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_spacing(self, spacing, step):
        a = smeared.noisy_gaussian_check(smeared.lattice_covariance("gef", spacing, 3), self.EPS).min_eigenvalue
        b = smeared.noisy_gaussian_check(smeared.lattice_covariance("gef", spacing + step, 3), self.EPS).min_eigenvalue
        assert b >= a - 1e-12

    @given(st.floats(0.0, 1.0))
    def test_identity_always_passes(self, eps):
        assert smeared.noisy_gaussian_check(np.eye(4), eps).passed

    def test_input_validation(self):
        bad = np.array([[1.0, 0.5], [0.2, 1.0]])
        with pytest.raises(PreconditionError):
            smeared.noisy_gaussian_check(bad, 0.1)
        with pytest.raises(PreconditionError):
            smeared.noisy_gaussian_check(2 * np.eye(2), 0.1)


class TestProductInequality:
    @given(st.floats(-3, 3), st.floats(0.01, 4))
    @settings(max_examples=20, deadline=None)
    def test_interval_sup_matches_grid_search(self, lo, width):
        f = smeared.IntervalIndicator(lo, lo + width)
        exact = f.gaussian_sup()
        grid = smeared.gaussian_sup_integral(lambda x: f(x), y_grid=np.linspace(-6, 6, 601), nodes=8001)
        assert grid == pytest.approx(exact, abs=2e-3)
        assert grid <= exact + 1e-3

    def test_interval_sup_reference(self):
        assert smeared.IntervalIndicator(-0.5, 1.0).gaussian_sup() == pytest.approx(0.5467452952462636, abs=1e-14)

    def test_product_inequality_holds(self):
        cov = 0.8 * np.array([[1.0, 0.6, 0.2], [0.6, 1.0, 0.6], [0.2, 0.6, 1.0]])
        funcs = [smeared.IntervalIndicator(-0.3, 0.4), smeared.IntervalIndicator(0.0, 1.0),
                 smeared.IntervalIndicator(-1.0, 0.2)]
        res = smeared.noisy_product_inequality_mc(cov, funcs, samples=50_000, seed=3)
        assert res.passed and res.lhs < res.rhs

    def test_exp_form_inequality_for_lipschitz(self):
        psi = smeared.lipschitz_psi(np.abs, 1.0)
        # |psi(x+y) - psi(x-y)| <= 2|y| so g(y) = 2|y| is admissible at scale 2y
        res = smeared.exp_form_inequality_mc(psi, lambda y: 2 * np.abs(y), 1.5 * np.eye(2), 0.1 * np.eye(2),
                                             samples=20_000, seed=1)
        assert res.passed


class TestCounterexample:
    def test_window_and_gap(self):
        p = smeared.counterexample_profile(2, 1e-3)
        big = math.log(1e3)
        assert p.a == pytest.approx(math.sqrt(big / 4)) and p.b == pytest.approx(math.sqrt(3 * big / 4))
        assert p.pointwise_gap == pytest.approx(big / 4 - math.log(2 * (2 + 1e-3**0.25)))
        assert p.lower_bound == pytest.approx((p.b - p.a) * p.pointwise_gap)

    def test_exact_probability(self):
        eps = 0.05
        p = smeared.counterexample_profile(2, eps)
        assert p.p_a_exact == pytest.approx((1 - math.exp(-eps * eps)) ** 2 * math.exp(-1), rel=1e-14)

    def test_monte_carlo_probability(self):
        p = smeared.counterexample_profile(2, 0.05, samples=400_000, seed=5)
        assert abs(p.p_a - p.p_a_exact) <= 4 * p.p_a_stderr

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_lower_bound_grows_faster_than_log(self, n):
        eps = np.array([1e-3, 1e-5, 1e-8, 1e-12])
        lb = np.array([smeared.counterexample_profile(n, e).lower_bound for e in eps])
        logs = np.log(1 / eps)
        assert np.all(np.diff(lb) > 0)
        slopes = np.diff(np.log(lb)) / np.diff(np.log(logs))
        assert slopes[-1] >= 1 + 1 / n

    def test_epsilon_range(self):
        with pytest.raises(PreconditionError):
            smeared.counterexample_profile(2, 0.5)
