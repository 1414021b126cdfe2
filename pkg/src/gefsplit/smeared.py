"""Smeared Lipschitz functionals, Gaussian noisy-lattice checks and the log counterexample.

The smeared functional of a transform ``psi`` is

    g(y) = sup_h log  int exp|psi((x+y)/2) - psi((x-y)/2)| gamma_h(dx),

where ``gamma_h`` is a centred Gaussian measure shifted by ``h``. The supremum
is taken over a finite grid of shifts. Integrals are computed on composite
Gauss-Legendre rules graded towards the singular points of the integrand.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from ._seeding import child_seed, standard_complex, stream
from .errors import InsufficientSamples, PreconditionError, QuadratureError
from .fields import gef_covariance
from .gef import EULER_GAMMA

#: minus the mean of log|u| under the standard real Gaussian
REAL_LOG_SHIFT = 0.5 * (EULER_GAMMA + math.log(2.0))


@dataclass
class PsiSpec:
    """A scalar transform of a real or complex Gaussian value.

    ``evaluator`` acts elementwise on real (domain ``"real"``) or complex
    (domain ``"complex"``) arrays. ``singular_points`` lists where it blows
    up; the quadrature refines around their images.
    """

    name: str
    domain: str
    evaluator: Callable
    centering: float = 0.0
    exponent: float = 1.0
    singular_points: tuple = (0.0,)

    def __post_init__(self):
        if self.domain not in ("real", "complex"):
            raise PreconditionError(f"domain must be real or complex, got {self.domain!r}")
        if not 0.0 < self.exponent <= 1.0:
            raise PreconditionError("declared exponent must lie in (0, 1]")

    def __call__(self, x):
        with np.errstate(divide="ignore"):
            return self.evaluator(x)

    def scaled(self, factor):
        """Multiply the transform by ``factor`` (the factor-2 and factor-16 variants)."""
        base = self.evaluator
        return PsiSpec(
            f"{factor:g}*{self.name}",
            self.domain,
            lambda x: factor * base(x),
            factor * self.centering,
            self.exponent,
            self.singular_points,
        )


def complex_log_psi():
    """log|z| + gamma_Euler/2, centred under the standard complex Gaussian."""
    shift = 0.5 * EULER_GAMMA
    return PsiSpec("log|z|+euler/2", "complex", lambda z: np.log(np.abs(z)) + shift, shift, 1.0)


def real_log_psi():
    return PsiSpec("log|x|+beta", "real", lambda x: np.log(np.abs(x)) + REAL_LOG_SHIFT, REAL_LOG_SHIFT, 1.0)


def real_half_log_psi():
    c = 0.5 * REAL_LOG_SHIFT
    return PsiSpec("0.5log|x|+beta/2", "real", lambda x: 0.5 * np.log(np.abs(x)) + c, c, 0.5)


def lipschitz_psi(func, lipschitz, domain="real", name="lipschitz"):
    """Wrap a globally Lipschitz transform (no singular points)."""
    spec = PsiSpec(name, domain, func, 0.0, 1.0, ())
    spec.lipschitz = float(lipschitz)
    return spec


# ---------------------------------------------------------------------------
# quadrature rules


@dataclass
class QuadratureScheme:
    """Composite Gauss-Legendre rule with geometric grading near singularities.

    ``nodes`` points per panel; ``levels`` dyadic grading levels towards each
    singular point; ``step`` is the largest panel width in units of the
    measure scale.
    """

    nodes: int = 8
    levels: int = 36
    step: float = 0.5
    angular_panels: int = 4

    def refined(self):
        return QuadratureScheme(self.nodes + 4, self.levels + 6, self.step * 2 / 3, self.angular_panels + 2)


def _gl_on(edges, n):
    """Nodes and weights of the composite n-point rule on consecutive ``edges``."""
    t, w = np.polynomial.legendre.leggauss(n)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (1 + t)).ravel(), (half * w).ravel()


def _graded_edges(length, inner, outer, step):
    """Panel edges on [0, length]: geometric (ratio 2) from ``inner`` up to
    ``outer``, then uniform panels no wider than ``step``."""
    if length <= 0:
        return np.array([0.0])
    edges = [0.0]
    e = min(inner, length)
    while e < min(outer, length):
        edges.append(e)
        e *= 2.0
    last = edges[-1]
    count = max(1, int(math.ceil((length - last) / step)))
    edges.extend(np.linspace(last, length, count + 1)[1:])
    return np.asarray(edges)


def _inner_distance(scale, anchor, levels):
    # never closer to the singular point than rounding allows
    return max(scale * 2.0 ** (-levels), 1e-13 * (abs(anchor) + scale))


def _singular_exponent(integrand, point, direction, reach):
    """Local power p in integrand ~ dist^{-p} near ``point`` (probe along ``direction``)."""
    d1, d2 = reach * 1e-7, reach * 1e-10
    f1 = float(np.abs(integrand(np.asarray([point + d1 * direction]))[0]))
    f2 = float(np.abs(integrand(np.asarray([point + d2 * direction]))[0]))
    if not (np.isfinite(f1) and np.isfinite(f2)) or f1 <= 0:
        return math.inf
    return math.log(f2 / f1) / math.log(d1 / d2)


def _real_nodes(y, sigma, singular, scheme):
    reach = abs(y) + 13.0 * sigma
    scale = min(abs(y), sigma) if y != 0 else sigma
    breaks = sorted({float(2 * s + sgn * y) for s in singular for sgn in (1, -1)})
    breaks = [b for b in breaks if -reach < b < reach]
    cuts = [-reach] + breaks + [reach]
    step = scheme.step * sigma
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        # each half is graded towards its end when that end is singular
        for anchor, sign, sing in ((lo, 1.0, lo in breaks), (hi, -1.0, hi in breaks)):
            length = mid - lo
            if sing:
                e = _graded_edges(length, _inner_distance(scale, anchor, scheme.levels), sigma, step)
            else:
                e = np.linspace(0.0, length, max(1, int(math.ceil(length / step))) + 1)
            t, w = _gl_on(e, scheme.nodes)
            xs.append(anchor + sign * t)
            ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _complex_nodes(y, sigma, scheme):
    """Nodes covering the half-plane {Re(x conj y) >= 0} in polar form about y.

    The mirror half-plane is handled by evaluating at -x.
    """
    d = abs(y)
    u = y / d
    reach = d + 13.0 * sigma
    scale = min(d, sigma)
    step = scheme.step * sigma
    inner = _inner_distance(scale, d, scheme.levels)
    kink = math.acos(-d / reach)
    spans = [(-0.5 * math.pi, 0.5 * math.pi), (0.5 * math.pi, kink), (kink, 2 * math.pi - kink), (2 * math.pi - kink, 1.5 * math.pi)]
    xs, ws = [], []
    for lo, hi in spans:
        if hi <= lo:
            continue
        th, wth = _gl_on(np.linspace(lo, hi, scheme.angular_panels + 1), scheme.nodes)
        for t, wt in zip(th, wth):
            c = math.cos(t)
            end = reach if c >= 0 else min(reach, d / -c)
            rho, wr = _gl_on(_graded_edges(end, inner, sigma, step), scheme.nodes)
            xs.append(y + rho * u * complex(math.cos(t), math.sin(t)))
            ws.append(wt * wr * rho)
    return np.concatenate(xs), np.concatenate(ws)


def default_h_grid(sigma=1.0, domain="real"):
    """Per-axis shift grid on [-6s, 6s] with step s/4, s the per-axis scale."""
    s = sigma if domain == "real" else sigma / math.sqrt(2.0)
    return s * np.arange(-24, 25) / 4.0


def _difference_integrand(psi, y):
    def f(x):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.exp(np.abs(psi((x + y) / 2.0) - psi((x - y) / 2.0)))

    return f


def _log_integrals(psi, sigma, y, h_axis, scheme):
    """log of the shifted-Gaussian integrals on the full h grid (1D or 2D)."""
    f = _difference_integrand(psi, y)
    if psi.domain == "real":
        x, w = _real_nodes(float(y), sigma, psi.singular_points, scheme)
        base = w * np.exp(-0.5 * (x / sigma) ** 2)
        shift = np.exp(np.outer(h_axis, x) / sigma**2)
        top = shift @ (base * f(x))
        bottom = shift @ base
        return np.log(top / bottom)
    if any(s != 0 for s in psi.singular_points):
        raise PreconditionError("complex quadrature supports a single singular point at 0")
    x, w = _complex_nodes(complex(y), sigma, scheme)
    x = np.concatenate([x, -x])
    w = np.concatenate([w, w])
    base = w * np.exp(-np.abs(x) ** 2 / sigma**2)
    a = np.exp(2.0 * np.outer(h_axis, x.real) / sigma**2)
    b = np.exp(2.0 * np.outer(h_axis, x.imag) / sigma**2)
    top = (a * (base * f(x))) @ b.T
    bottom = (a * base) @ b.T
    return np.log(top / bottom)


@dataclass
class GValue:
    y: complex
    value: float
    error: float
    argmax_h: tuple
    divergent: bool = False


def g_of_y(psi, y, sigma=1.0, h_grid=None, scheme=None, rtol=0.01):
    """Smeared-Lipschitz functional at one point ``y``.

    Returns a :class:`GValue` with the grid supremum and the difference
    between two quadrature refinements as error estimate. A non-integrable
    singularity yields ``value = inf`` with ``divergent = True``.

    Raises
    ------
    QuadratureError
        If the two refinements differ by more than ``rtol`` (relative).
    """
    if y == 0:
        return GValue(y, 0.0, 0.0, (0.0,))
    scheme = scheme or QuadratureScheme()
    h_axis = default_h_grid(sigma, psi.domain) if h_grid is None else np.asarray(h_grid, dtype=float)
    dim = 1 if psi.domain == "real" else 2
    f = _difference_integrand(psi, y)
    for s in psi.singular_points:
        for sgn in (1, -1):
            point = 2 * s + sgn * y
            direction = 1.0 if dim == 1 else complex(y) / abs(y) * 1j
            if _singular_exponent(f, point, direction, abs(y)) >= dim - 0.02:
                return GValue(y, math.inf, 0.0, (), True)
    coarse = _log_integrals(psi, sigma, y, h_axis, scheme)
    fine = _log_integrals(psi, sigma, y, h_axis, scheme.refined())
    v1, v2 = float(np.max(coarse)), float(np.max(fine))
    err = abs(v2 - v1)
    if err > rtol * max(abs(v2), 1e-300):
        raise QuadratureError(f"g({y}) refinements disagree: {v1} vs {v2}")
    idx = np.unravel_index(np.argmax(fine), fine.shape)
    return GValue(y, max(v2, 0.0), err, tuple(float(h_axis[i]) for i in idx))


@dataclass
class GBoundResult:
    """g(y) on a grid with the fitted constant C = max g(y)/|y|^delta."""

    psi: str
    exponent: float
    y: np.ndarray
    g: np.ndarray
    errors: np.ndarray
    constant: float
    verdict: str
    growth_ratio: float
    h_grid: np.ndarray
    scheme: QuadratureScheme
    sigma: float = 1.0

    @property
    def ratio(self):
        return self.g / np.abs(self.y) ** self.exponent

    @property
    def bounded(self):
        return self.verdict == "bounded"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["y", "g", "ratio"])
            for yy, gg, rr in zip(np.abs(self.y), self.g, self.ratio):
                wr.writerow([repr(float(yy)), repr(float(gg)), repr(float(rr))])


def smeared_constant(psi, exponent=None, y_grid=None, sigma=1.0, h_grid=None, scheme=None):
    """Fit C = max g(y)/|y|^delta and decide whether the ratio stays bounded.

    The ratio is called unbounded when g is infinite, or when its maximum
    sits at one of the two smallest |y| and exceeds the ratio at the
    geometric middle of the grid by more than a factor 1.5.
    """
    delta = psi.exponent if exponent is None else float(exponent)
    y = np.logspace(-3, 0, 13) if y_grid is None else np.asarray(y_grid)
    mags = np.abs(y)
    if mags.min() <= 0 or math.log10(mags.max() / mags.min()) < 3 - 1e-9:
        raise PreconditionError("y grid must be nonzero and span at least three decades")
    order = np.argsort(mags)
    y = y[order]
    mags = mags[order]
    h_axis = default_h_grid(sigma, psi.domain) if h_grid is None else np.asarray(h_grid, dtype=float)
    scheme = scheme or QuadratureScheme()
    vals = [g_of_y(psi, yy, sigma, h_axis, scheme) for yy in y]
    g = np.array([v.value for v in vals])
    errs = np.array([v.error for v in vals])
    ratio = g / mags**delta
    mid = int(np.argmin(np.abs(np.log(mags) - 0.5 * (np.log(mags[0]) + np.log(mags[-1])))))
    if not np.all(np.isfinite(ratio)):
        verdict, growth = "unbounded", math.inf
    else:
        growth = float(np.max(ratio) / ratio[mid]) if ratio[mid] > 0 else math.inf
        verdict = "unbounded" if (int(np.argmax(ratio)) < 2 and growth > 1.5) else "bounded"
    const = float(np.max(ratio))
    return GBoundResult(psi.name, delta, y, g, errs, const, verdict, growth, h_axis, scheme, sigma)


def centering_check(psi, sigma=1.0):
    """Integral of ``psi`` against the centred Gaussian of scale ``sigma``.

    Returns (value, error estimate). Raises QuadratureError if scipy's error
    estimate exceeds 1e-8.
    """
    if psi.domain == "real":
        dens = lambda x: math.exp(-0.5 * (x / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma)
        total, err = 0.0, 0.0
        for a, b in ((-40 * sigma, 0.0), (0.0, 40 * sigma)):
            v, e = integrate.quad(lambda x: float(psi(np.array([x]))[0]) * dens(x), a, b, limit=400, epsabs=1e-13, epsrel=1e-13)
            total += v
            err += e
    else:
        th = 2 * np.pi * np.arange(64) / 64

        def radial(r):
            vals = psi(r * np.exp(1j * th))
            return float(np.mean(vals)) * 2.0 * r * math.exp(-((r / sigma) ** 2)) / sigma**2

        total, err = 0.0, 0.0
        for a, b in ((0.0, sigma), (sigma, 12 * sigma)):
            v, e = integrate.quad(radial, a, b, limit=400, epsabs=1e-14, epsrel=1e-13)
            total += v
            err += e
    if err > 1e-8:
        raise QuadratureError(f"centering quadrature error estimate {err:g}")
    return total, err


# ---------------------------------------------------------------------------
# noisy Gaussian lattices


def lattice_points(spacing, half_width, offset=(0.0, 0.0)):
    idx = np.arange(-half_width, half_width + 1)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    pts = np.stack([i.ravel() + offset[0], j.ravel() + offset[1]], axis=1)
    return spacing * pts


def lattice_covariance(kernel, spacing, half_width, offset=(0.0, 0.0)):
    """Covariance matrix E G_{p_j} conj G_{p_k} on the lattice spacing*(Z^2 + offset).

    ``kernel`` is ``"gef"`` or a KernelSpec exposing a ``covariance`` method.
    """
    if spacing <= 0 or half_width < 0:
        raise PreconditionError("spacing must be positive and half width nonnegative")
    pts = lattice_points(spacing, half_width, offset)
    if isinstance(kernel, str) and kernel == "gef" or getattr(kernel, "kind", None) == "gef":
        return gef_covariance(pts[:, None, :], pts[None, :, :])
    if hasattr(kernel, "covariance"):
        diff = pts[:, None, :] - pts[None, :, :]
        cov = np.asarray(kernel.covariance(diff), dtype=complex)
        return cov / cov[0, 0]
    raise PreconditionError("kernel has no closed-form covariance")


@dataclass
class NoisyCheckResult:
    spacing: Optional[float]
    epsilon: float
    size: int
    min_eigenvalue: float
    passed: bool


def noisy_gaussian_check(cov, epsilon, spacing=None, atol=1e-10):
    """Test whether (1+eps)^2 Sigma - I is positive semidefinite.

    For Gaussian vectors this is equivalent to the rescaled array being a
    sum of an independent Gaussian vector and iid standard noise.
    """
    cov = np.asarray(cov)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise PreconditionError("covariance must be square")
    scale = max(1.0, float(np.max(np.abs(cov))))
    if np.max(np.abs(cov - cov.conj().T)) > 1e-12 * scale:
        raise PreconditionError("covariance is not Hermitian")
    if np.max(np.abs(np.diag(cov) - 1.0)) > 1e-9:
        raise PreconditionError("covariance must have unit diagonal")
    m = (1.0 + epsilon) ** 2 * cov - np.eye(cov.shape[0])
    lam = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    return NoisyCheckResult(spacing, float(epsilon), cov.shape[0], lam, lam >= -atol)


# ---------------------------------------------------------------------------
# product inequality for noisy vectors


@dataclass
class IntervalIndicator:
    """Indicator of [lo, hi]; its shifted Gaussian integrals are exact."""

    lo: float
    hi: float

    def __call__(self, x):
        return ((x >= self.lo) & (x <= self.hi)).astype(float)

    def gaussian_sup(self):
        half = 0.5 * (self.hi - self.lo)
        return float(2.0 * stats.norm.cdf(half) - 1.0)


def gaussian_sup_integral(f, y_grid=None, nodes=4001, reach=10.0):
    """sup over y of int f(y+z) gamma_R(dz), on a grid of shifts."""
    if hasattr(f, "gaussian_sup"):
        return f.gaussian_sup()
    y = np.linspace(-8, 8, 321) if y_grid is None else np.asarray(y_grid)
    z = np.linspace(-reach, reach, nodes)
    w = np.full(nodes, z[1] - z[0])
    w[[0, -1]] *= 0.5
    w = w * stats.norm.pdf(z)
    return float(np.max(f(y[:, None] + z[None, :]) @ w))


@dataclass
class InequalityCheck:
    lhs: float
    lhs_stderr: float
    rhs: float
    n_samples: int
    passed: bool
    rhs_stderr: float = 0.0
    extra: dict = field(default_factory=dict)


def _gaussian_rows(cov, n, rng):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if vals[0] < -1e-10 * max(1.0, vals[-1]):
        raise PreconditionError("covariance of the smooth part is not positive semidefinite")
    root = vecs * np.sqrt(np.clip(vals, 0, None))
    return rng.standard_normal((n, cov.shape[0])) @ root.T


def noisy_product_inequality_mc(y_cov, funcs, samples=100_000, seed=0):
    """Monte Carlo check of E prod f_k(X_k) <= prod sup_y int f_k(y+z) gamma(dz).

    ``X = Y + Z`` with ``Y ~ N(0, y_cov)`` and ``Z`` iid standard normal.
    """
    if samples < 2:
        raise InsufficientSamples("need at least two samples")
    y_cov = np.atleast_2d(y_cov)
    if len(funcs) != y_cov.shape[0]:
        raise PreconditionError("one function per coordinate is required")
    rng = stream(child_seed(seed, "noisy-product"))
    x = _gaussian_rows(y_cov, samples, rng) + rng.standard_normal((samples, y_cov.shape[0]))
    prod = np.ones(samples)
    for k, f in enumerate(funcs):
        prod *= f(x[:, k])
    lhs = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(samples))
    rhs = float(np.prod([gaussian_sup_integral(f) for f in funcs]))
    return InequalityCheck(lhs, se, rhs, samples, lhs <= rhs + 3 * se)


def exp_form_inequality_mc(psi, g, x_cov, y_cov, samples=100_000, seed=0):
    """Monte Carlo check of E exp sum|psi(X+Y)-psi(X-Y)| <= E exp sum g(Y).

    ``X`` is standard-noisy with covariance ``x_cov`` (so ``x_cov - I`` must be
    positive semidefinite), ``Y`` is an independent Gaussian vector, and ``g``
    is a callable satisfying the smeared condition for ``psi``.
    """
    if samples < 2:
        raise InsufficientSamples("need at least two samples")
    x_cov = np.atleast_2d(x_cov)
    n = x_cov.shape[0]
    rng = stream(child_seed(seed, "exp-form"))
    x = _gaussian_rows(x_cov - np.eye(n), samples, rng) + rng.standard_normal((samples, n))
    y = _gaussian_rows(y_cov, samples, rng)
    left = np.exp(np.sum(np.abs(psi(x + y) - psi(x - y)), axis=1))
    right = np.exp(np.sum(g(y), axis=1))
    diff = left - right
    lhs, rhs = float(left.mean()), float(right.mean())
    se = float(diff.std(ddof=1) / math.sqrt(samples))
    return InequalityCheck(lhs, float(left.std(ddof=1) / math.sqrt(samples)), rhs, samples, lhs <= rhs + 3 * se,
                           float(right.std(ddof=1) / math.sqrt(samples)), {"difference_stderr": se})


# ---------------------------------------------------------------------------
# counterexample for log on correlated complex Gaussians


@dataclass
class CounterexampleProfile:
    n: int
    epsilon: float
    a: float
    b: float
    pointwise_gap: float
    lower_bound: float
    p_a: Optional[float] = None
    p_a_stderr: Optional[float] = None
    p_a_exact: Optional[float] = None

    @property
    def normalized_p_a(self):
        return None if self.p_a is None else self.p_a / self.epsilon**4

    @property
    def normalized_p_a_stderr(self):
        return None if self.p_a_stderr is None else self.p_a_stderr / self.epsilon**4


def counterexample_profile(n, epsilon, samples=0, seed=0):
    """Window [a, b] and integral lower bound for g(t) = exp(-t^n).

    On [a, b] the log-difference exceeds log(1/eps)/4 - log(2(2 + eps^{1/4})),
    so the integral is at least (b - a) times that gap. When ``samples`` is
    positive, P(A) is estimated as the product of the Monte Carlo
    frequencies of the three independent events |xi0| <= eps, |xi1| <= eps
    and |xi2| >= 1, with a delta-method standard error.
    """
    if n < 1 or int(n) != n:
        raise PreconditionError("n must be a positive integer")
    if not 0.0 < epsilon < math.exp(-4.0 / 3.0):
        raise PreconditionError("epsilon must lie in (0, e^{-4/3})")
    big = math.log(1.0 / epsilon)
    a = (0.25 * big) ** (1.0 / n)
    b = (0.75 * big) ** (1.0 / n)
    gap = 0.25 * big - math.log(2.0 * (2.0 + epsilon**0.25))
    prof = CounterexampleProfile(int(n), float(epsilon), a, b, gap, (b - a) * gap)
    small = -math.expm1(-(epsilon**2))
    prof.p_a_exact = small * small * math.exp(-1.0)
    if samples:
        if samples < 2:
            raise InsufficientSamples("need at least two samples")
        probs, rel_var = [], 0.0
        for k, (name, test) in enumerate(
            (("xi0", lambda m: m <= epsilon), ("xi1", lambda m: m <= epsilon), ("xi2", lambda m: m >= 1.0))
        ):
            rng = stream(child_seed(seed, "counterexample-" + name))
            hits = 0
            left = samples
            while left:
                m = min(left, 1 << 20)
                hits += int(np.count_nonzero(test(np.abs(standard_complex(rng, m)))))
                left -= m
            p = hits / samples
            probs.append(p)
            rel_var += (1 - p) / max(hits, 1)
        prof.p_a = float(np.prod(probs))
        prof.p_a_stderr = float(prof.p_a * math.sqrt(rel_var))
    return prof


def normal_tail(c):
    return float(special.ndtr(-c))
