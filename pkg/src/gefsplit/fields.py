"""Lattices, discretized white noise and Gaussian field synthesis.

White noise is represented by independent cell integrals: a real cell has
variance equal to the cell volume, a complex cell has independent real and
imaginary parts carrying half of it each. Fields are Riemann sums of a kernel
against those cell integrals, so the discrete model has an exactly computable
covariance.

Arrays of noise and field values may carry a leading sample axis; every
operation here treats that axis as a batch of independent realizations.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, signal
from scipy.special import erfc

from ._seeding import standard_complex, stream
from .errors import ExtentError, InsufficientSamples, PreconditionError

DEFAULT_TRUNCATION_TOL = 1e-6


@dataclass(frozen=True)
class Lattice:
    """Square lattice with an odd number of nodes per axis, centred at ``origin``."""

    spacing: float
    half_extent: float
    dim: int = 2
    origin: Optional[tuple] = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise PreconditionError("dim must be 1 or 2")
        if not self.spacing > 0:
            raise PreconditionError("spacing must be positive")
        if self.half_extent < self.spacing:
            raise PreconditionError("half_extent must be at least one spacing")
        ratio = self.half_extent / self.spacing
        if abs(ratio - round(ratio)) > 1e-9:
            raise PreconditionError("half_extent must be an integer multiple of spacing")
        if self.origin is None:
            object.__setattr__(self, "origin", (0.0,) * self.dim)
        elif len(self.origin) != self.dim:
            raise PreconditionError("origin must have one coordinate per dimension")

    @property
    def half_count(self):
        return int(round(self.half_extent / self.spacing))

    @property
    def n_side(self):
        return 2 * self.half_count + 1

    @property
    def shape(self):
        return (self.n_side,) * self.dim

    @property
    def size(self):
        return self.n_side**self.dim

    @property
    def cell_volume(self):
        return self.spacing**self.dim

    def axis(self, k=0):
        m = self.half_count
        return self.origin[k] + self.spacing * np.arange(-m, m + 1)

    def coordinates(self):
        """Node coordinates: a 1D array, or a pair of 2D arrays (``indexing='ij'``)."""
        if self.dim == 1:
            return self.axis(0)
        return np.meshgrid(self.axis(0), self.axis(1), indexing="ij")

    def points(self):
        """All nodes as an ``(size, dim)`` array in C order."""
        if self.dim == 1:
            return self.axis(0)[:, None]
        x, y = self.coordinates()
        return np.stack([x.ravel(), y.ravel()], axis=-1)

    def complex_nodes(self):
        x, y = self.coordinates()
        return x + 1j * y

    def node_index(self, point):
        """Multi-index of the node at ``point``; raises if it is not a node."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        idx = (point - np.asarray(self.origin)) / self.spacing + self.half_count
        rounded = np.rint(idx).astype(int)
        if np.any(np.abs(idx - rounded) > 1e-9) or np.any(rounded < 0) or np.any(rounded >= self.n_side):
            raise PreconditionError(f"{tuple(point)} is not a lattice node")
        return tuple(int(i) for i in rounded)

    def sublattice(self, half_extent):
        """Centred sub-lattice with the same spacing (and origin)."""
        if half_extent > self.half_extent + 1e-12:
            raise ExtentError("sub-lattice larger than parent lattice")
        return Lattice(self.spacing, half_extent, self.dim, self.origin)

    def crop(self, values, sub):
        """Restrict node values (trailing ``dim`` axes) to the nodes of ``sub``."""
        off = self.half_count - sub.half_count
        sl = (Ellipsis,) + (slice(off, off + sub.n_side),) * self.dim
        return values[sl]


@dataclass(frozen=True)
class NoiseGrid:
    lattice: Lattice
    kind: str
    cells: np.ndarray
    seed: int

    @property
    def n_samples(self):
        return self.cells.shape[0] if self.cells.ndim > self.lattice.dim else None


@dataclass(frozen=True)
class FieldGrid:
    """Field values on a lattice (or on an explicit point list when ``lattice`` is None)."""

    lattice: Optional[Lattice]
    values: np.ndarray
    provenance: dict = field(default_factory=dict)
    points: Optional[np.ndarray] = None
    singular: Optional[np.ndarray] = None

    @property
    def n_samples(self):
        base = self.lattice.dim if self.lattice is not None else 1
        return self.values.shape[0] if self.values.ndim > base else None


def sample_white_noise(lattice, kind="real", seed=0, samples=None, start=0):
    """Independent cell integrals of white noise on ``lattice``.

    With ``samples`` set, a batch is returned whose entry ``i`` is exactly the
    grid a single call with ``start + i`` as stream index would produce.
    """
    if kind not in ("real", "complex"):
        raise PreconditionError("kind must be 'real' or 'complex'")
    scale = np.sqrt(lattice.cell_volume)
    indices = [start] if samples is None else range(start, start + samples)
    out = []
    for i in indices:
        rng = stream(seed, i)
        if kind == "real":
            out.append(rng.standard_normal(lattice.shape) * scale)
        else:
            out.append(standard_complex(rng, lattice.shape) * scale)
    cells = out[0] if samples is None else np.stack(out)
    return NoiseGrid(lattice, kind, cells, seed)


# ---------------------------------------------------------------- kernels


def wedge(a, b):
    """Planar wedge product a1*b2 - a2*b1 over the last axis."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def gef_kernel(t, s):
    """Nonstationary kernel whose white-noise integral has the GEF covariance."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    d2 = np.sum((s - t) ** 2, axis=-1)
    return np.exp(-1j * wedge(t, s) - 0.5 * d2) / np.sqrt(np.pi)


def gef_covariance(s, t):
    """E G_s conj(G_t) for the GEF field: exp(-i s^t - |s-t|^2/2)."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.exp(-1j * wedge(s, t) - 0.5 * np.sum((s - t) ** 2, axis=-1))


@dataclass(frozen=True)
class KernelSpec:
    """Covariance-generating kernel phi(t, s).

    Stationary kernels are radial profiles of t - s. ``evaluator`` is only
    used by the custom kind and must accept broadcastable ``(..., dim)`` arrays.
    """

    kind: str
    dim: int = 2
    value_type: str = "real"
    alpha: Optional[float] = None
    normalizer: Optional[float] = None
    width: Optional[float] = None
    evaluator: Optional[Callable] = None
    stationary: bool = True
    support_radius: Optional[float] = None

    def profile(self, radius):
        """Radial profile of a stationary kernel."""
        radius = np.asarray(radius, dtype=float)
        if self.kind == "power-decay":
            return self.normalizer * (1.0 + radius) ** (-self.alpha / 2.0)
        if self.kind == "gaussian":
            w2 = self.width**2
            return (2.0 / (np.pi * w2)) ** (self.dim / 4.0) * np.exp(-(radius**2) / w2)
        raise PreconditionError(f"kernel kind {self.kind!r} has no radial profile")

    def __call__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if self.kind == "gef":
            return gef_kernel(t, s)
        if self.kind == "custom":
            return self.evaluator(t, s)
        return self.profile(np.sqrt(np.sum((t - s) ** 2, axis=-1)))

    def tail_mass(self, radius):
        """L2 mass of phi(t, .) outside the ball of the given radius around t."""
        rho = float(radius)
        if self.kind == "power-decay":
            a, c2 = self.alpha, self.normalizer**2
            if self.dim == 1:
                return c2 * 2.0 * (1 + rho) ** (1 - a) / (a - 1)
            return c2 * 2 * np.pi * ((1 + rho) ** (2 - a) / (a - 2) - (1 + rho) ** (1 - a) / (a - 1))
        if self.kind == "gaussian":
            # |phi|^2 is a centred Gaussian density with variance w^2/4 per axis
            x = 2.0 * rho**2 / self.width**2
            if self.dim == 1:
                return float(erfc(np.sqrt(x)))
            return float(np.exp(-x))
        if self.kind == "gef":
            return float(np.exp(-(rho**2)))
        if self.support_radius is not None:
            return 0.0 if rho >= self.support_radius else 1.0
        raise PreconditionError("custom kernel needs support_radius for truncation")

    def truncation_radius(self, tol=DEFAULT_TRUNCATION_TOL):
        """Smallest radius whose complement carries less than ``tol`` of the L2 mass."""
        if self.kind == "custom":
            if self.support_radius is None:
                raise PreconditionError("custom kernel needs support_radius")
            return float(self.support_radius)
        if self.tail_mass(0.0) <= tol:
            return 0.0
        hi = 1.0
        while self.tail_mass(hi) > tol:
            hi *= 2.0
        return optimize.brentq(lambda r: self.tail_mass(r) - tol, 0.0, hi, xtol=1e-10)

    def energy(self):
        """Integral of |phi(t, .)|^2 by radial quadrature (independent of t)."""
        if self.kind == "gef":
            f = lambda r: 2 * np.pi * r * np.exp(-(r**2)) / np.pi  # noqa: E731
            return integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12)[0]
        if self.kind == "custom":
            raise PreconditionError("custom kernels carry no energy quadrature")
        if self.dim == 1:
            f = lambda r: 2.0 * self.profile(r) ** 2  # noqa: E731
        else:
            f = lambda r: 2 * np.pi * r * self.profile(r) ** 2  # noqa: E731
        return _radial_quad(f)

    def covariance(self, r):
        """Stationary covariance E G_0 G_r of the continuum field (Gaussian kind closed form)."""
        r = np.asarray(r, dtype=float)
        d2 = np.sum(r**2, axis=-1) if self.dim == 2 else r**2
        if self.kind == "gaussian":
            return np.exp(-d2 / (2 * self.width**2))
        raise PreconditionError("closed-form covariance only for the Gaussian kernel")


def _radial_quad(f):
    total = 0.0
    edges = [0.0, 1.0, 4.0, 16.0, 64.0, 256.0, np.inf]
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=200)[0]
    return total


def power_decay_kernel(alpha, dim=2):
    """phi(t) = c (1 + |t|)^(-alpha/2), c fixed by unit energy."""
    if dim not in (1, 2):
        raise PreconditionError("dim must be 1 or 2")
    if not alpha > dim:
        raise PreconditionError(f"power-decay kernel needs alpha > dim (got {alpha}, dim {dim})")
    if dim == 1:
        raw = 2 * integrate.quad(lambda r: (1 + r) ** (-alpha), 0, np.inf, epsrel=1e-13)[0]
    else:
        raw = _radial_quad(lambda r: 2 * np.pi * r * (1 + r) ** (-alpha))
    return KernelSpec("power-decay", dim=dim, alpha=float(alpha), normalizer=float(1.0 / np.sqrt(raw)))


def gaussian_kernel(width=1.0, dim=2):
    if not width > 0:
        raise PreconditionError("width must be positive")
    return KernelSpec("gaussian", dim=dim, width=float(width))


def gef_kernel_spec():
    return KernelSpec("gef", dim=2, value_type="complex", stationary=False)


def custom_kernel(evaluator, support_radius, dim=2, value_type="real"):
    return KernelSpec(
        "custom", dim=dim, value_type=value_type, evaluator=evaluator, stationary=False,
        support_radius=float(support_radius),
    )


# ---------------------------------------------------------------- synthesis


def stencil(kernel, spacing, radius):
    """Kernel sampled at lattice offsets within the square of half-width ``radius``."""
    k = int(np.ceil(radius / spacing - 1e-12))
    offs = spacing * np.arange(-k, k + 1)
    if kernel.dim == 1:
        return kernel.profile(np.abs(offs))
    x, y = np.meshgrid(offs, offs, indexing="ij")
    return kernel.profile(np.hypot(x, y))


def evaluation_lattice(kernel, noise_lattice, eval_half_extent=None, tol=DEFAULT_TRUNCATION_TOL):
    """Largest (or requested) centred region where the truncated kernel fits in the noise lattice."""
    reach = kernel.truncation_radius(tol)
    k = int(np.ceil(reach / noise_lattice.spacing - 1e-12))
    avail = noise_lattice.half_count - k
    if eval_half_extent is None:
        if avail < 1:
            raise ExtentError(f"noise half-extent {noise_lattice.half_extent} cannot hold kernel reach {reach:.3f}")
        return noise_lattice.sublattice(avail * noise_lattice.spacing), k
    want = int(round(eval_half_extent / noise_lattice.spacing))
    if want > avail:
        raise ExtentError(
            f"evaluation half-extent {eval_half_extent} plus kernel reach {reach:.3f} "
            f"exceeds noise half-extent {noise_lattice.half_extent}"
        )
    return noise_lattice.sublattice(eval_half_extent), k


def convolve_stationary(kernel, noise, eval_half_extent=None, tol=DEFAULT_TRUNCATION_TOL):
    """G(t) = sum over cells of phi(t - s) W_s, evaluated by zero-padded FFT.

    The kernel is truncated to the square stencil covering its ``tol`` reach;
    evaluation nodes are those whose stencil lies inside the noise lattice.
    """
    if not kernel.stationary:
        raise PreconditionError("convolve_stationary needs a stationary kernel")
    if kernel.dim != noise.lattice.dim:
        raise PreconditionError("kernel and lattice dimensions differ")
    sub, k = evaluation_lattice(kernel, noise.lattice, eval_half_extent, tol)
    st = stencil(kernel, noise.lattice.spacing, k * noise.lattice.spacing)
    dim = noise.lattice.dim
    axes = tuple(range(noise.cells.ndim - dim, noise.cells.ndim))
    st_b = st.reshape((1,) * (noise.cells.ndim - dim) + st.shape)
    full = signal.fftconvolve(noise.cells, st_b, mode="valid", axes=axes)
    # 'valid' output is centred on the noise lattice with half-count (n - k)
    valid_lat = noise.lattice.sublattice((noise.lattice.half_count - k) * noise.lattice.spacing)
    values = valid_lat.crop(full, sub)
    prov = {"kernel": kernel.kind, "noise_seed": noise.seed, "reach_cells": k}
    return FieldGrid(sub, values, prov)


def kernel_rows(kernel, noise_lattice, eval_points, tol=DEFAULT_TRUNCATION_TOL):
    """Matrix of phi(t_i, s_cell) * 1 over all noise cells, after an extent check."""
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if noise_lattice.dim == 1:
        pts = pts.reshape(-1, 1)
    reach = kernel.truncation_radius(tol)
    lo = np.asarray(noise_lattice.origin) - noise_lattice.half_extent
    hi = np.asarray(noise_lattice.origin) + noise_lattice.half_extent
    if np.any(pts - reach < lo - 1e-12) or np.any(pts + reach > hi + 1e-12):
        raise ExtentError(f"evaluation points within kernel reach {reach:.3f} of the noise boundary")
    cells = noise_lattice.points()
    rows = kernel(pts[:, None, :], cells[None, :, :])
    return np.asarray(rows)


def synthesize_nonstationary(kernel, noise, eval_points, tol=DEFAULT_TRUNCATION_TOL):
    """G(t) = sum over all cells of phi(t, s) W_s at arbitrary evaluation points."""
    rows = kernel_rows(kernel, noise.lattice, eval_points, tol)
    dim = noise.lattice.dim
    flat = noise.cells.reshape(noise.cells.shape[: noise.cells.ndim - dim] + (-1,))
    values = flat @ rows.T
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    return FieldGrid(None, values, {"kernel": kernel.kind, "noise_seed": noise.seed}, points=pts)


# ---------------------------------------------------------------- phases


@dataclass(frozen=True)
class PhaseSpec:
    """Unit-modulus phase factors tau1(r, t), tau2(r, s) of a phase-twisted stationary kernel."""

    tau1: Callable
    tau2: Callable


def gef_phases():
    return PhaseSpec(lambda r, t: np.exp(1j * wedge(r, t)), lambda r, s: np.exp(-1j * wedge(r, s)))


def trivial_phases():
    one = lambda r, t: np.ones(np.broadcast_shapes(np.shape(r)[:-1], np.shape(t)[:-1]))  # noqa: E731
    return PhaseSpec(one, one)


def verify_phase_covariance(kernel, phases, shifts, sample_pairs):
    """Max |phi(t+r, s+r) - tau1(r,t) phi(t,s) tau2(r,s)| over shifts and pairs.

    Also asserts that both phase factors have unit modulus to 1e-12.
    """
    worst = 0.0
    for r in np.atleast_2d(np.asarray(shifts, dtype=float)):
        for t, s in sample_pairs:
            t = np.asarray(t, dtype=float)
            s = np.asarray(s, dtype=float)
            a, b = phases.tau1(r, t), phases.tau2(r, s)
            if abs(abs(a) - 1) > 1e-12 or abs(abs(b) - 1) > 1e-12:
                raise PreconditionError("phase factors must have unit modulus")
            if np.all(r == 0):
                lhs = kernel(t, s)
            else:
                lhs = kernel(t + r, s + r)
            err = abs(lhs - a * kernel(t, s) * b)
            worst = max(worst, float(err))
    return worst


# ---------------------------------------------------------------- estimators


@dataclass(frozen=True)
class CovarianceEstimate:
    matrix: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    n_samples: int


def empirical_covariance(values, batches=100):
    """Sample second-moment matrix (1/n) sum G(s) conj G(t) with batch-means errors.

    ``values`` is an ``(n, p)`` array (or a batched FieldGrid flattened to
    that shape) of field values at ``p`` chosen nodes.
    """
    if isinstance(values, FieldGrid):
        values = values.values.reshape(values.values.shape[0], -1)
    v = np.asarray(values)
    n = v.shape[0]
    if n < 2:
        raise InsufficientSamples("empirical covariance needs at least 2 samples")
    nb = max(2, min(batches, n))
    size = n // nb
    v = v[: nb * size]
    prods = v[:, :, None] * np.conj(v[:, None, :])
    bm = prods.reshape(nb, size, *prods.shape[1:]).mean(axis=1)
    mat = bm.mean(axis=0)
    se_re = bm.real.std(axis=0, ddof=1) / np.sqrt(nb)
    se_im = bm.imag.std(axis=0, ddof=1) / np.sqrt(nb)
    mat = 0.5 * (mat + np.conj(mat.T))
    return CovarianceEstimate(mat, se_re, se_im, nb * size)
