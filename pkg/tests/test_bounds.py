import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gefsplit import bounds
from gefsplit._seeding import stream
from gefsplit.errors import PreconditionError

# E exp(C|Z|) for Z standard normal, by 30-digit quadrature
EXP_ABS_MOMENT = {0.5: 1.5670592366928565, 1.0: 2.7742859576700096, 2.0: 14.441908195414959,
                  3.0: 179.7912347043325}
# int over the negative quadrant of (1 + |t - s|)^-alpha ds at t = (1, 1)
QUADRANT_INNER = {7.0: 7.13154666982891397549e-4, 5.0: 1.01071866390787000156e-2}


class TestExpMomentBounds:
    @pytest.mark.parametrize("C,want", sorted(EXP_ABS_MOMENT.items()))
    def test_tight_is_exp_abs_moment(self, C, want):
        assert bounds.gaussian_exp_moment_bound(C) == pytest.approx(want, rel=1e-12)

    def test_tight_at_one_to_four_decimals(self):
        closed = 2 * math.exp(0.5) * 0.5 * (1 + math.erf(1 / math.sqrt(2)))
        assert abs(bounds.gaussian_exp_moment_bound(1.0) - closed) < 1e-4
        assert bounds.gaussian_exp_moment_bound(1.0, "weak") == pytest.approx(3.661542698039876, rel=1e-12)

    @given(st.floats(0, 8))
    def test_tight_below_weak(self, C):
        t = bounds.gaussian_exp_moment_bound(C)
        w = bounds.gaussian_exp_moment_bound(C, "weak")
        assert 1.0 <= t <= w * (1 + 1e-12)

    @given(st.floats(0, 3))
    @settings(max_examples=20)
    def test_delta_one_form_reduces_to_tight(self, C):
        d = bounds.gaussian_exp_moment_bound(C, "delta", delta=1.0)
        assert d == pytest.approx(bounds.gaussian_exp_moment_bound(C), rel=1e-8)

    def test_pair_form_adds(self):
        assert bounds.gaussian_exp_moment_bound((0.3, 0.7), "pair") == bounds.gaussian_exp_moment_bound(1.0)

    def test_invalid_arguments(self):
        with pytest.raises(PreconditionError):
            bounds.gaussian_exp_moment_bound(-1.0)
        with pytest.raises(PreconditionError):
            bounds.gaussian_exp_moment_bound(1.0, "delta", delta=2.5)

    def test_fully_correlated_attains_the_bound(self):
        rep = bounds.mc_exp_moment_vs_bound(bounds.fully_correlated_model(), samples=200_000, seed=4)
        assert abs(rep.estimate - rep.analytic) <= 4 * rep.stderr

    def test_independent_cells_stay_below(self):
        rep = bounds.mc_exp_moment_vs_bound(bounds.independent_cells_model(1.0, 16), samples=20_000, seed=4, cells=64)
        assert rep.passed and rep.estimate < rep.analytic

    def test_random_models_are_reproducible(self):
        a = [m.name for m in bounds.random_covariance_models(6, seed=3)]
        b = [m.name for m in bounds.random_covariance_models(6, seed=3)]
        assert a == b and len(set(a)) == 6


class TestRearrangement:
    @given(st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=10, deadline=None)
    def test_centred_arrangement_is_largest_2d(self, a1, a2):
        lhs, rhs, holds = bounds.rearrangement_check(lambda r: 1 / max(r, 1e-300) ** 0.5,
                                                     lambda r: math.exp(-r * r), (a1, a2))
        assert holds

    def test_one_dimensional(self):
        lhs, rhs, holds = bounds.rearrangement_check(lambda r: math.exp(-r), lambda r: 1 / (1 + r * r), (1.3,), dim=1)
        assert holds and lhs < rhs

    def test_zero_shift_is_equality(self):
        lhs, rhs, _ = bounds.rearrangement_check(lambda r: math.exp(-r), lambda r: math.exp(-r), (0.0, 0.0))
        assert lhs == rhs


class TestCones:
    @pytest.mark.parametrize("alpha,want", sorted(QUADRANT_INNER.items()))
    def test_inner_integral_reference(self, alpha, want):
        got = bounds.inner_integral(np.array([1.0, 1.0]), bounds.QUADRANT_NEG, alpha)
        assert got == pytest.approx(want, rel=1e-9)

    @given(st.floats(0, 5), st.floats(0, 5), st.floats(3, 12))
    @settings(max_examples=30, deadline=None)
    def test_inner_integral_decreases_with_alpha(self, x, y, alpha):
        t = np.array([x, y])
        a = bounds.inner_integral(t, bounds.QUADRANT_NEG, alpha)
        b = bounds.inner_integral(t, bounds.QUADRANT_NEG, alpha + 1)
        assert 0 < b <= a

    def test_threshold(self):
        assert bounds.convergence_threshold(1.0) == 6.0
        assert bounds.convergence_threshold(0.5) == 10.0

    def test_divergent_parameters_refuse_integral_mode(self):
        with pytest.raises(PreconditionError):
            bounds.cone_integral(6.0, 1.0)

    def test_shell_growth_below_threshold(self):
        res = bounds.cone_integral(5.0, 1.0, mode="shells", shell_range=range(5, 9))
        assert all(abs(q / math.sqrt(2) - 1) < 0.1 for q in res.shell_ratios)

    def test_converges_above_threshold(self):
        res = bounds.cone_integral(7.0, 1.0)
        assert res.converged and res.refinement_change < 0.01 and np.isfinite(res.value)

    def test_lattice_sums_bounded_over_offsets(self):
        rng = stream(2024)
        offsets = rng.random((20, 2))
        vals = np.array([bounds.cone_integral(7.0, 1.0, mode="lattice_sum", offset=tuple(o), lattice_radius=8).value
                         for o in offsets])
        assert np.all(np.isfinite(vals)) and np.all(vals > 0)
        assert vals.max() / vals.min() < 2.5

    def test_lattice_tail_continuation_is_consistent(self):
        a = bounds.cone_integral(7.0, 1.0, mode="lattice_sum", offset=(0.37, 0.81), lattice_radius=8).value
        b = bounds.cone_integral(7.0, 1.0, mode="lattice_sum", offset=(0.37, 0.81), lattice_radius=24).value
        assert a == pytest.approx(b, rel=0.01)

    def test_shell_csv(self, tmp_path):
        res = bounds.cone_integral(5.0, 1.0, mode="shells", shell_range=range(2, 5))
        path = tmp_path / "shells.csv"
        res.to_csv(path)
        rows = path.read_text().splitlines()
        assert rows[0] == "n,c_n,ratio" and len(rows) == 4
