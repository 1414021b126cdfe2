"""Gaussian entire function: coefficients, damped evaluation, zeros and linear statistics."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from . import kernels
from ._seeding import standard_complex, stream
from .errors import OverflowRiskError, PreconditionError, SupportError, WindingMismatch
from .fields import FieldGrid

EULER_GAMMA = float(np.euler_gamma)
# e^{-|z|^2/2} stays a normal double up to |z| ~ 37.6; keep a margin
STABLE_RADIUS = 36.0
SINGULAR_THRESHOLD = 1e-300
ZERO_ORDER_TOL = 1e-12


@dataclass(frozen=True)
class GefCoefficients:
    zeta: np.ndarray
    seed: int
    index: int = 0

    @property
    def order(self):
        return self.zeta.shape[0] - 1


def sample_gef(order, seed=0, index=0):
    """Coefficients zeta_0..zeta_order, iid standard complex Gaussian."""
    if order < 0:
        raise PreconditionError("order must be nonnegative")
    zeta = standard_complex(stream(seed, index), order + 1)
    return GefCoefficients(zeta, seed, index)


@lru_cache(maxsize=256)
def truncation_order(radius, tol=ZERO_ORDER_TOL):
    """Smallest N whose Poisson(radius^2) upper tail beyond N is at most ``tol``."""
    if not radius > 0:
        raise PreconditionError("radius must be positive")
    if not 0 < tol < 1:
        raise PreconditionError("tol must lie in (0, 1)")
    mu = float(radius) ** 2
    n = 0
    # sf(n) = P(K > n); step from below the mean, then walk up
    n = max(0, int(mu - 10 * np.sqrt(mu)) - 1)
    while stats.poisson.sf(n, mu) > tol:
        n += 1
    while n > 0 and stats.poisson.sf(n - 1, mu) <= tol:
        n -= 1
    return n


def _check_stable(z):
    if np.size(z) and np.max(np.abs(z)) > STABLE_RADIUS:
        raise OverflowRiskError(f"|z| exceeds the stable evaluation radius {STABLE_RADIUS}")


def eval_fstar(coeffs, z):
    """F*(z) = sum zeta_k z^k / sqrt(k!) * exp(-|z|^2/2), by damped term recurrence."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    _check_stable(z_arr)
    val, _ = kernels.fstar_eval(np.ascontiguousarray(coeffs.zeta), np.ascontiguousarray(z_arr.ravel()))
    val = val.reshape(z_arr.shape)
    return val[0] if np.ndim(z) == 0 else val


def eval_fstar_with_derivative(coeffs, z):
    """Damped value and damped derivative F'(z) exp(-|z|^2/2)."""
    z_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=complex)).ravel())
    _check_stable(z_arr)
    return kernels.fstar_eval(np.ascontiguousarray(coeffs.zeta), z_arr)


def _log_x(fstar):
    mag = np.abs(fstar)
    singular = mag < SINGULAR_THRESHOLD
    with np.errstate(divide="ignore"):
        x = np.log(np.where(singular, np.nan, mag)) + 0.5 * EULER_GAMMA
    return x, singular


def field_X(coeffs, lattice):
    """X = log|F*| + gamma/2 on every lattice node; singular nodes are NaN and flagged."""
    nodes = lattice.complex_nodes()
    x, singular = _log_x(eval_fstar(coeffs, nodes))
    return FieldGrid(lattice, x, {"field": "X", "seed": coeffs.seed, "index": coeffs.index}, singular=singular)


# ---------------------------------------------------------------- zeros


@dataclass(frozen=True)
class ZeroSet:
    zeros: np.ndarray
    reliable_radius: float
    residual_winding_check: int
    max_residual: float = 0.0
    check_radius: Optional[float] = None


def _newton_polygon_guesses(logmag):
    """Initial guesses on circles whose radii come from the upper convex hull of log|b_k|."""
    deg = logmag.shape[0] - 1
    lm = logmag.tolist()
    hull = []
    for k in np.flatnonzero(np.isfinite(logmag)).tolist():
        while len(hull) >= 2:
            i, j = hull[-2], hull[-1]
            # drop j if it lies on or below the chord i -> k
            if (lm[j] - lm[i]) * (k - i) <= (lm[k] - lm[i]) * (j - i):
                hull.pop()
            else:
                break
        hull.append(k)
    guesses = []
    for i, j in zip(hull[:-1], hull[1:]):
        m = j - i
        rad = np.exp(-(logmag[j] - logmag[i]) / m)
        ang = 2 * np.pi * np.arange(m) / m + 2 * np.pi * i / deg + 0.4
        guesses.append(rad * np.exp(1j * ang))
    return np.concatenate(guesses) if guesses else np.zeros(0, dtype=complex)


def winding_number(log_abs, phase, radius_log, max_points=1 << 16):
    """Zeros inside |w| = e^{radius_log} of sum c_k w^k given log|c_k| and arg c_k."""
    deg = log_abs.shape[0] - 1
    la = log_abs + np.arange(deg + 1) * radius_log
    top = np.max(la[np.isfinite(la)])
    c = np.exp(la - top) * np.exp(1j * phase)
    m = 1
    while m < 4 * (deg + 1):
        m *= 2
    while True:
        vals = np.fft.ifft(c, n=m) * m
        d = np.angle(np.roll(vals, -1) / vals)
        if np.max(np.abs(d)) < np.pi / 4 or m >= max_points:
            break
        m *= 2
    return int(np.rint(np.sum(d) / (2 * np.pi)))


def _polish(coeffs, z, steps=3):
    for _ in range(steps):
        v, d = eval_fstar_with_derivative(coeffs, z)
        safe = np.where(d == 0, 1.0, d)
        z = np.where(d == 0, z, z - v / safe)
    v, _ = eval_fstar_with_derivative(coeffs, z)
    return z, np.abs(v)


def find_zeros(coeffs, radius, margin=2.0, check_order=True, residual_tol=1e-10):
    """All zeros of the truncated series in |z| <= radius, with an argument-principle check."""
    if check_order:
        need = truncation_order(radius + margin, ZERO_ORDER_TOL)
        if coeffs.order < need:
            raise PreconditionError(f"order {coeffs.order} < {need} needed for radius {radius}")
    if radius + 1 > STABLE_RADIUS:
        raise OverflowRiskError("radius too large for damped evaluation")
    zeta = np.asarray(coeffs.zeta, dtype=complex)
    nz = np.flatnonzero(zeta)
    if nz.size == 0:
        raise PreconditionError("identically zero series has no isolated zeros")
    low, high = int(nz[0]), int(nz[-1])
    ks = np.arange(zeta.shape[0])
    with np.errstate(divide="ignore"):
        log_a = np.log(np.abs(zeta)) - 0.5 * gammaln(ks + 1)
    phase = np.angle(zeta)
    origin_roots = np.zeros(low, dtype=complex)
    sub = log_a[low : high + 1]
    deg = high - low
    if deg == 0:
        roots = np.zeros(0, dtype=complex)
    else:
        scale = np.exp((sub[0] - sub[-1]) / deg)
        lb = sub + np.arange(deg + 1) * np.log(scale)
        lb -= np.max(lb[np.isfinite(lb)])
        b = np.exp(lb) * np.exp(1j * phase[low : high + 1])
        w = _newton_polygon_guesses(lb)
        _, done = kernels.aberth(np.ascontiguousarray(b), w, 500, 1e-14)
        if not np.all(done) and deg <= 60:
            w = np.roots(b[::-1])
        roots = scale * w
    inner = roots[np.abs(roots) <= radius + 1.0]
    if inner.size:
        inner, resid = _polish(coeffs, inner)
    else:
        resid = np.zeros(0)
    keep = np.abs(inner) <= radius
    found = np.concatenate([origin_roots, inner[keep]])
    max_res = float(np.max(resid[keep])) if np.any(keep) else 0.0
    if max_res > residual_tol:
        raise WindingMismatch(-1, found.size, radius)
    # the argument principle is ill-conditioned when a zero sits on the contour;
    # move the check circle into a root-free annulus close to the radius
    moduli = np.concatenate([np.zeros(low), np.abs(inner)])
    check = _check_radius(moduli, radius)
    wind = winding_number(log_a, phase, np.log(check))
    inside = int(np.sum(moduli <= check))
    if wind != inside:
        raise WindingMismatch(wind, inside, check)
    return ZeroSet(found, float(radius), wind, max_res, float(check))


def _check_radius(moduli, radius, clearance=0.01, step=0.02):
    for k in range(50):
        for cand in (radius + k * step, radius - k * step):
            if cand > 0 and (moduli.size == 0 or np.min(np.abs(moduli - cand)) >= clearance):
                return cand
    return radius


# ---------------------------------------------------------------- test functions


@dataclass(frozen=True)
class TestFunction:
    """Radial test function with its Laplacian and precomputed norms."""

    name: str
    profile: Callable
    laplacian: Optional[Callable]
    support_radius: float
    norm_h_sq: float
    norm_lap_sq: float
    integral_h: float
    recipe: Optional[tuple] = None  # (kind, factor) for rebuilding in worker processes

    __test__ = False  # not a pytest class

    def __reduce__(self):
        if self.recipe is None:
            raise TypeError(f"test function {self.name!r} cannot be sent to worker processes")
        return _rebuild_test_function, self.recipe

    def __call__(self, z):
        return self.profile(np.abs(z))

    def lap(self, z):
        return self.laplacian(np.abs(z))

    def scaled(self, factor):
        """The function factor * h with norms rescaled."""
        f = float(factor)
        lap = None if self.laplacian is None else (lambda r, g=self.laplacian: f * g(r))
        recipe = None if self.recipe is None else (self.recipe[0], self.recipe[1] * f)
        return TestFunction(
            f"{f}*{self.name}", lambda r, g=self.profile: f * g(r), lap, self.support_radius,
            f * f * self.norm_h_sq, f * f * self.norm_lap_sq, f * self.integral_h, recipe,
        )


def _radial(f, a=1.0):
    return integrate.quad(lambda r: 2 * np.pi * r * f(r), 0, a, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def _bump(power):
    def h(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 1, np.clip(1 - r * r, 0, None) ** power, 0.0)

    def lap(r):
        r = np.asarray(r, dtype=float)
        u = np.clip(1 - r * r, 0, None)
        # radial Laplacian of (1 - r^2)^p: f'' + f'/r
        val = -4 * power * u ** (power - 1) + 4 * power * (power - 1) * r * r * u ** (power - 2)
        return np.where(r < 1, val, 0.0)

    return h, lap


def bump_test_function(kind="bump"):
    """Named radial profiles: ``bump`` (1-|z|^2)^3, ``bump4`` (1-|z|^2)^4, ``disk`` indicator."""
    if kind in ("bump", "bump4"):
        h, lap = _bump(3 if kind == "bump" else 4)
        return TestFunction(kind, h, lap, 1.0, _radial(lambda r: h(r) ** 2), _radial(lambda r: lap(r) ** 2), _radial(h),
                            (kind, 1.0))
    if kind == "disk":
        h = lambda r: np.where(np.asarray(r) <= 1, 1.0, 0.0)  # noqa: E731
        return TestFunction(kind, h, None, 1.0, np.pi, np.nan, np.pi, (kind, 1.0))
    raise PreconditionError(f"unknown test function {kind!r}")


@lru_cache(maxsize=None)
def _rebuild_test_function(kind, factor):
    h = bump_test_function(kind)
    return h if factor == 1.0 else h.scaled(factor)


@dataclass(frozen=True)
class LinearStatisticResult:
    value: float
    r: float
    mean_term: float
    deviation: float


def linear_statistic(zeros, h, r):
    """n(r, h) = sum over zeros of h(z/r), with its mean and deviation."""
    if r * h.support_radius > zeros.reliable_radius + 1e-12:
        raise SupportError(f"r * support = {r * h.support_radius} exceeds reliable radius {zeros.reliable_radius}")
    value = float(np.sum(h(np.asarray(zeros.zeros) / r))) if len(zeros.zeros) else 0.0
    mean_term = r * r / np.pi * h.integral_h
    return LinearStatisticResult(value, float(r), mean_term, value - mean_term)


@dataclass(frozen=True)
class FieldStatistic:
    value: float
    singular_nodes: int


def _disk_nodes(h, r, lattice):
    reach = r * h.support_radius
    if lattice.half_extent + 1e-12 < reach:
        raise SupportError(f"lattice half-extent {lattice.half_extent} does not cover radius {reach}")
    if lattice.spacing > reach / 50 + 1e-12:
        raise SupportError(f"spacing {lattice.spacing} coarser than support/50 = {reach / 50}")
    nodes = lattice.complex_nodes().ravel()
    return nodes[np.abs(nodes) < reach]


class FieldQuadrature:
    """Midpoint-rule weights for integrals of X against h(z/r) or its Laplacian."""

    def __init__(self, h, r, lattice):
        self.nodes = _disk_nodes(h, r, lattice)
        self.cell = lattice.cell_volume
        self.r = float(r)
        self.w_h = h(self.nodes / r) * self.cell
        self.w_lap = None if h.laplacian is None else h.lap(self.nodes / r) * self.cell / (2 * np.pi * r * r)

    def x_values(self, coeffs):
        return _log_x(eval_fstar(coeffs, self.nodes))

    def deviation(self, x, singular):
        return float(np.sum(np.where(singular, 0.0, self.w_lap * np.nan_to_num(x)))), int(singular.sum())

    def integral(self, x, singular):
        return float(np.sum(np.where(singular, 0.0, self.w_h * np.nan_to_num(x)))), int(singular.sum())


def field_statistic(coeffs, h, r, lattice):
    """(1 / 2 pi r^2) * integral of Lap h(z/r) X_z dz by the lattice midpoint rule."""
    q = FieldQuadrature(h, r, lattice)
    x, singular = q.x_values(coeffs)
    return FieldStatistic(*q.deviation(x, singular))


def field_integral(coeffs, h, r, lattice):
    """Integral of h(z/r) X_z dz by the lattice midpoint rule."""
    q = FieldQuadrature(h, r, lattice)
    x, singular = q.x_values(coeffs)
    return FieldStatistic(*q.integral(x, singular))
