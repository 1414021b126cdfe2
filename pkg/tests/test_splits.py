import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gefsplit import fields, splits
from gefsplit.errors import PreconditionError

KERNEL = fields.power_decay_kernel(7.0)


@pytest.fixture(scope="module")
def split_setup():
    reach = int(np.ceil(KERNEL.truncation_radius()))
    lat = fields.Lattice(1.0, float(reach + 2))
    noise = splits.two_split_noise(lat, "real", seed=17, samples=40)
    sf = splits.split_fields(KERNEL, noise, 2.0)
    return lat, noise, sf, splits.leaks_from_members(sf.members, sf.lattice)


def test_sign_convention():
    np.testing.assert_array_equal(splits.sgn([-0.5, 0.0, 2.0]), [-1, 1, 1])
    assert splits.fnz(0, -1) == -1 and splits.fnz(1, -1) == 1 and splits.fnz(0, 0) == 0
    with pytest.raises(PreconditionError):
        splits.fnz(2, 0)


@given(st.lists(st.floats(-500, 500), min_size=1, max_size=20))
def test_dyadic_round_is_exact_grid(values):
    r = splits.dyadic_round(np.array(values))
    assert splits.is_dyadic(r, splits.QUANT_BITS)
    assert np.max(np.abs(r - values)) <= 2.0 ** -(splits.QUANT_BITS + 1)


def test_dyadic_round_refuses_large_values():
    with pytest.raises(PreconditionError):
        splits.dyadic_round(np.array([2.0e3]))


class TestGluing:
    def test_members_follow_first_nonzero_rule(self, split_setup):
        _, noise, _, _ = split_setup
        assert splits.check_fnz_gluing(noise)

    def test_tampering_is_detected(self, split_setup):
        _, noise, _, _ = split_setup

        class Tampered(splits.TwoSplitNoise):
            def member(self, alpha, beta):
                out = super().member(alpha, beta)
                if (alpha, beta) == (0, 1):
                    out = out.copy()
                    out[..., 0, -1] += 2.0**-20
                return out

        bad = Tampered(noise.lattice, noise.corners, noise.kind, noise.seed)
        assert not splits.check_fnz_gluing(bad)

    def test_second_leak_is_order_free(self, split_setup):
        _, _, _, lk = split_setup
        assert splits.check_leak_commutation(lk)

    def test_second_leak_matches_its_kernel(self, split_setup):
        lat, _, sf, lk = split_setup
        pts = np.array([[1.0, 1.0], [-1.0, 2.0]])
        pred = splits.leak_covariance_prediction(KERNEL, lat, pts, 12, sf.reach_cells)
        idx = [sf.lattice.node_index(p) for p in pts]
        vals = np.stack([lk.g12[(slice(None),) + i] for i in idx], axis=1)
        est = fields.empirical_covariance(vals, batches=20)
        assert np.all(np.abs(est.matrix.real - pred.real) <= 5 * est.stderr_re + 1e-12)


TRANSFORMS = [splits.identity(), splits.absolute(), splits.relu(), splits.clip(0.25), splits.tent(),
              splits.scale(-1.5)]


@pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: t.name)
def test_lipschitz_maps_dominate_exactly(split_setup, tr):
    _, _, sf, lk = split_setup
    y = splits.apply_pointwise(tr, sf)
    ok, worst = splits.check_lipschitz_domination(lk, y.leaks, tr.lipschitz)
    assert ok, worst
    ok, worst = splits.check_quadruple_bound(sf.members, y.members, sf.lattice, tr.lipschitz)
    assert ok, worst
    assert splits.check_leak_commutation(y.leaks)


def test_non_lipschitz_map_is_caught(split_setup):
    _, _, sf, lk = split_setup
    cube = splits.Transform("cube", lambda x: 8.0 * x**3, 1.0, True)
    y = splits.apply_pointwise(cube, sf, center=None)
    ok, worst = splits.check_lipschitz_domination(lk, y.leaks, 1.0)
    assert not ok and worst > 0


def test_shared_centering_constant(split_setup):
    _, _, sf, _ = split_setup
    y = splits.apply_pointwise(splits.absolute(), sf)
    pooled = np.concatenate([np.ravel(v) for v in y.members.values()])
    assert abs(np.mean(pooled)) < 1e-9


dyadic_weight = st.integers(-32, 32).map(lambda k: k / 16.0)
measure = st.lists(st.tuples(st.integers(-4, 4), dyadic_weight), min_size=1, max_size=6)


@given(measure, st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_convolution_domination(mu, seed):
    lat = fields.Lattice(0.25, 6.0, dim=1)
    triple = splits.split_noise_1d(lat, "real", seed, samples=3)
    pos, members = splits.split_fields_1d(fields.gaussian_kernel(0.5, dim=1), triple, 2.0)
    res = splits.convolve_split(mu, members, pos)
    assert res.exact
    assert res.dominated, res.worst_excess


def test_convolution_support_must_fit():
    pos = np.arange(3.0)
    members = {a: np.zeros(3) for a in (0, -1, 1)}
    with pytest.raises(PreconditionError):
        splits.convolve_split([(-2, 1.0), (2, 1.0)], members, pos)


def test_one_dimensional_split_glues_at_zero():
    lat = fields.Lattice(0.5, 3.0, dim=1)
    t = splits.split_noise_1d(lat, "real", 5, samples=2)
    x = lat.axis(0)
    np.testing.assert_array_equal(t.zero[:, x < 0], t.minus[:, x < 0])
    np.testing.assert_array_equal(t.zero[:, x >= 0], t.plus[:, x >= 0])


def test_noisier_coupling_is_exact():
    lat = fields.Lattice(0.25, 8.0, dim=1)
    res = splits.noisier_coupling_residual(fields.gaussian_kernel(1.0, dim=1), lat, [-1.0, 0.0, 0.5, 2.0])
    assert res < 1e-12


def test_splittability_conditions_hold_for_gaussian_kernel():
    lat = fields.Lattice(0.25, 6.0)
    out = splits.verify_splittability_conditions(fields.gaussian_kernel(1.0), splits.tent(), 8.0, lat, samples=100,
                                                 seed=2, eval_half_extent=2.0)
    for key in ("a1", "a2", "a3", "a4"):
        assert out[key]["pass"], out[key]
        assert set(out[key]) >= {"condition", "region", "C", "estimate", "stderr", "n", "pass"}
    assert out["b"]["pass"]
