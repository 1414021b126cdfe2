"""Exponential-moment bounds for Gaussian integrals and cone-integral diagnostics."""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from ._seeding import child_seed, stream
from .errors import InsufficientSamples, PreconditionError, QuadratureError, SlowConvergence


def gaussian_exp_moment_bound(C, form="tight", delta=None):
    """Upper bounds on E exp int |G| in terms of C = int sqrt(E G_t^2) dt.

    Parameters
    ----------
    C : float or pair of floats
        Integrated standard deviation; for ``form="pair"`` the two
        processes' values, which are added.
    form : {"tight", "weak", "delta", "pair"}
        ``tight`` is e^{C^2/2} * 2 Phi(C); ``weak`` is exp(sqrt(2/pi) C + C^2/2);
        ``delta`` is int exp(C|u|^delta) gamma_R(du) for delta in (0, 2).
    """
    if form == "pair":
        C = float(sum(C))
        form = "tight"
    C = float(C)
    if C < 0:
        raise PreconditionError("C must be nonnegative")
    if form == "tight":
        return float(math.exp(0.5 * C * C) * 2.0 * special.ndtr(C))
    if form == "weak":
        return float(math.exp(math.sqrt(2.0 / math.pi) * C + 0.5 * C * C))
    if form == "delta":
        if delta is None or not 0.0 < delta < 2.0:
            raise PreconditionError("delta form needs delta in (0, 2)")
        f = lambda u: math.exp(C * u**delta - 0.5 * u * u)  # noqa: E731
        val, _ = integrate.quad(f, 0.0, np.inf, limit=200)
        return float(2.0 * val / math.sqrt(2.0 * math.pi))
    raise PreconditionError(f"unknown bound form {form!r}")


@dataclass
class BoundReport:
    """Analytic bound with an optional Monte Carlo counterpart."""

    name: str
    params: dict
    analytic: float
    estimate: Optional[float] = None
    stderr: Optional[float] = None
    n_samples: int = 0
    passed: Optional[bool] = None
    extra: dict = field(default_factory=dict)

    def judge(self):
        if self.estimate is not None:
            self.passed = bool(self.estimate <= self.analytic + 3.0 * self.stderr)
        return self.passed


@dataclass
class CovarianceModel:
    """Centred Gaussian process on [0, 1) given by its covariance function."""

    name: str
    covariance: Callable

    def discretize(self, cells):
        t = (np.arange(cells) + 0.5) / cells
        return t, self.covariance(t[:, None], t[None, :])


def fully_correlated_model(scale=1.0):
    return CovarianceModel(f"constant*{scale:g}", lambda s, t: scale**2 * np.ones(np.broadcast(s, t).shape))


def independent_cells_model(scale=1.0, cells=64):
    """Piecewise constant field with independent values on ``cells`` bins."""
    def cov(s, t):
        return scale**2 * (np.floor(s * cells) == np.floor(t * cells)).astype(float)

    return CovarianceModel(f"independent-cells*{scale:g}", cov)


_CORRELATIONS = {
    "squared-exponential": lambda u: np.exp(-0.5 * u * u),
    "exponential": lambda u: np.exp(-u),
    "matern32": lambda u: (1 + math.sqrt(3) * u) * np.exp(-math.sqrt(3) * u),
    "rational-quadratic": lambda u: 1.0 / (1.0 + 0.5 * u * u),
}


def random_covariance_models(count=10, seed=0):
    """Stationary correlations times a random smooth amplitude profile."""
    rng = stream(child_seed(seed, "covariance-models"))
    names = list(_CORRELATIONS)
    out = []
    for k in range(count):
        kind = names[k % len(names)]
        corr = _CORRELATIONS[kind]
        length = float(10 ** rng.uniform(-2, 0.5))
        amp = float(rng.uniform(0.2, 1.5))
        wob = float(rng.uniform(0, 0.8))
        freq = int(rng.integers(1, 4))
        phase = float(rng.uniform(0, 2 * np.pi))

        def cov(s, t, corr=corr, length=length, amp=amp, wob=wob, freq=freq, phase=phase):
            sd = lambda x: amp * (1 + wob * np.sin(2 * np.pi * freq * x + phase))  # noqa: E731
            return sd(s) * sd(t) * corr(np.abs(s - t) / length)

        out.append(CovarianceModel(f"{kind}(l={length:.3g},a={amp:.3g})", cov))
    return out


def mc_exp_moment_vs_bound(model, samples=20_000, seed=0, cells=64, scale=1.0):
    """Monte Carlo E exp int_0^1 |G| against the tight bound at C = int sd.

    The process is discretized on ``cells`` midpoints; the bound applies to
    the discrete measure exactly, so no discretization slack is added.
    """
    if samples < 100:
        raise InsufficientSamples("need at least 100 samples")
    t, cov = model.discretize(cells)
    cov = scale**2 * cov
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    if vals[0] < -1e-9 * max(1.0, vals[-1]):
        raise PreconditionError(f"model {model.name} is not positive semidefinite")
    root = vecs * np.sqrt(np.clip(vals, 0, None))
    C = float(np.sum(np.sqrt(np.clip(np.diag(cov), 0, None))) / cells)
    rng = stream(child_seed(seed, "exp-moment-" + model.name))
    total, total2, share_top = 0.0, 0.0, []
    done = 0
    all_e = []
    while done < samples:
        m = min(samples - done, 50_000)
        g = rng.standard_normal((m, cells)) @ root.T
        e = np.exp(np.abs(g).sum(axis=1) / cells)
        all_e.append(e)
        done += m
    e = np.concatenate(all_e)
    est = float(e.mean())
    se = float(e.std(ddof=1) / math.sqrt(samples))
    top = np.sort(e)[::-1][: max(1, samples // 100)]
    share = float(top.sum() / e.sum())
    rep = BoundReport(
        "exp-moment-vs-tight",
        {"model": model.name, "C": C, "cells": cells, "scale": scale},
        gaussian_exp_moment_bound(C, "tight"),
        est,
        se,
        samples,
        extra={"heavy_tail": share > 0.5, "top1pct_share": share, "weak": gaussian_exp_moment_bound(C, "weak")},
    )
    rep.judge()
    return rep


# ---------------------------------------------------------------------------
# rearrangement


def _radial_integral(func, dim):
    surface = 2.0 if dim == 1 else 2.0 * math.pi
    pieces = ((0.0, 1.0), (1.0, np.inf))
    return surface * sum(integrate.quad(lambda r: func(r) * r ** (dim - 1), a, b, limit=200)[0] for a, b in pieces)


def rearrangement_check(f, g, shift, dim=2, tol=1e-8, angular_nodes=128):
    """Compare int f(|x+a|) g(|x|) dx with int f(|x|) g(|x|) dx.

    ``f`` may be singular at 0; ``g`` should be bounded. Returns
    (lhs, rhs, holds).
    """
    a = np.atleast_1d(np.asarray(shift, dtype=float))
    if a.size != dim:
        raise PreconditionError("shift dimension does not match dim")
    rhs = _radial_integral(lambda r: f(r) * g(r), dim)
    norm_a = float(np.linalg.norm(a))
    if norm_a == 0:
        return rhs, rhs, True
    if dim == 1:
        x0 = -float(a[0])
        pts = sorted({x0, 0.0})
        cuts = [-np.inf] + pts + [np.inf]
        lhs = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            lhs += integrate.quad(lambda x: f(abs(x - x0)) * g(abs(x)), lo, hi, limit=200)[0]
    else:
        # polar coordinates about -a, where f(|x+a|) is singular
        phi = 2 * np.pi * (np.arange(angular_nodes) + 0.5) / angular_nodes
        vals = []
        for p in phi:
            v = np.array([math.cos(p), math.sin(p)])
            # closest approach of the ray to the origin, where g may kink
            proj = float(v @ a)
            brk = [proj] if proj > 0 else []
            cuts = [0.0] + brk + [proj + 1.0 if proj > 0 else 1.0, np.inf]

            def integrand(rho):
                x = -a + rho * v
                return f(rho) * g(float(np.hypot(x[0], x[1]))) * rho

            vals.append(sum(integrate.quad(integrand, lo, hi, limit=200)[0] for lo, hi in zip(cuts[:-1], cuts[1:])))
        lhs = float(np.mean(vals) * 2 * np.pi)
    return float(lhs), float(rhs), bool(lhs <= rhs + tol * max(1.0, abs(rhs)))


# ---------------------------------------------------------------------------
# cone integrals


@dataclass(frozen=True)
class Cone:
    """Closed convex cone {s : n_i . s >= 0 for all i} in the plane."""

    name: str
    normals: tuple
    sector: tuple  # polar angle range (lo, hi) of the cone

    def contains(self, s):
        s = np.asarray(s, dtype=float)
        ok = np.ones(s.shape[:-1], dtype=bool)
        for n in self.normals:
            ok &= s @ np.asarray(n) >= 0
        return ok

    def edges(self):
        return [self.sector[0], self.sector[1]]


QUADRANT_NEG = Cone("quadrant(-,-)", ((-1.0, 0.0), (0.0, -1.0)), (math.pi, 1.5 * math.pi))
QUADRANT_POS = Cone("quadrant(+,+)", ((1.0, 0.0), (0.0, 1.0)), (0.0, 0.5 * math.pi))
CONE45 = Cone("cone45", ((1.0, -1.0), (1.0, 1.0)), (-0.25 * math.pi, 0.25 * math.pi))
LEFT_HALFPLANE = Cone("halfplane(s1<=0)", ((-1.0, 0.0),), (0.5 * math.pi, 1.5 * math.pi))

CONE_PAIRS = {
    "quadrants": (QUADRANT_NEG, QUADRANT_POS),
    "halfplane-cone45": (CONE45, LEFT_HALFPLANE),
}


def _radial_antiderivative(rho, alpha):
    """G with G' = rho/(1+rho)^alpha and G(inf) = 0 (alpha > 2)."""
    u = 1.0 + rho
    return u ** (2.0 - alpha) / (2.0 - alpha) - u ** (1.0 - alpha) / (1.0 - alpha)


def inner_integral(t, cone, alpha, panels=32, nodes=8):
    """int over ``cone`` of (1 + |t - s|)^{-alpha} ds, for one point ``t``.

    Polar coordinates about ``t``: each ray meets the convex cone in an
    interval whose radial integral is closed-form; the angle is integrated
    by composite Gauss-Legendre with breaks at the apex and edge directions.
    """
    if alpha <= 2:
        raise PreconditionError("inner integral diverges for alpha <= 2")
    t = np.asarray(t, dtype=float)
    breaks = [0.0, 2 * math.pi]
    if np.hypot(*t) > 0:
        breaks.append(math.atan2(-t[1], -t[0]) % (2 * math.pi))
    for e in cone.edges():
        breaks.extend([e % (2 * math.pi), (e + math.pi) % (2 * math.pi)])
    breaks = np.unique(np.asarray(breaks))
    edges = np.concatenate([np.linspace(lo, hi, max(2, int(panels * (hi - lo) / (2 * math.pi)) + 1))[:-1] for lo, hi in zip(breaks[:-1], breaks[1:]) if hi > lo] + [[2 * math.pi]])
    phi, w = _gl(edges, nodes)
    v = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    lo = np.zeros_like(phi)
    hi = np.full_like(phi, np.inf)
    for n in cone.normals:
        n = np.asarray(n)
        nt = float(n @ t)
        nv = v @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -nt / nv
        pos = nv > 0
        neg = nv < 0
        lo = np.where(pos, np.maximum(lo, r), lo)
        hi = np.where(neg, np.minimum(hi, r), hi)
        if nt < 0:
            hi = np.where(nv == 0, -1.0, hi)
    ok = hi > lo
    lo, hi = lo[ok], hi[ok]
    upper = np.where(np.isinf(hi), 0.0, _radial_antiderivative(np.where(np.isinf(hi), 0.0, hi), alpha))
    seg = upper - _radial_antiderivative(lo, alpha)
    return float(np.sum(w[ok] * seg))


def _gl(edges, n):
    t, w = np.polynomial.legendre.leggauss(n)
    a, b = np.asarray(edges[:-1])[:, None], np.asarray(edges[1:])[:, None]
    half = 0.5 * (b - a)
    return (a + half * (1 + t)).ravel(), (half * w).ravel()


def _shell_integral(cone1, cone2, alpha, delta, r_lo, r_hi, level):
    """int over {t in cone1 : r_lo < |t| < r_hi} of I(t)^{delta/2} dt."""
    n = 4 * level
    r, wr = _gl(np.linspace(r_lo, r_hi, 2), n)
    lo, hi = cone1.sector
    th, wt = _gl(np.linspace(lo, hi, 1 + level), 8)
    total = 0.0
    for ri, wri in zip(r, wr):
        vals = np.array([inner_integral((ri * math.cos(a), ri * math.sin(a)), cone2, alpha, 16 * level, 8) for a in th])
        total += wri * ri * float(np.sum(wt * vals ** (0.5 * delta)))
    return total


@dataclass
class ConeResult:
    """Outer cone integral or its dyadic-shell diagnostics."""

    pair: str
    alpha: float
    delta: float
    mode: str
    value: float
    shells: list  # (n, c_n)
    convergent_claim: bool
    converged: bool
    refinement_change: Optional[float] = None
    offsets: Optional[list] = None

    @property
    def shell_ratios(self):
        c = [s[1] for s in self.shells]
        return [c[i + 1] / c[i] for i in range(len(c) - 1)]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["n", "c_n", "ratio"])
            ratios = [None] + self.shell_ratios
            for (n, c), q in zip(self.shells, ratios):
                wr.writerow([n, repr(float(c)), "" if q is None else repr(float(q))])


def convergence_threshold(delta):
    """alpha above which the outer integral converges: 2(1 + 2/delta)."""
    return 2.0 * (1.0 + 2.0 / delta)


def _shell_series(cone1, cone2, alpha, delta, level, max_shells, rel_stop):
    inner = _shell_integral(cone1, cone2, alpha, delta, 0.0, 1.0, level)
    shells = [(-1, inner)]
    total = inner
    n = 0
    converged = False
    while n < max_shells:
        c = _shell_integral(cone1, cone2, alpha, delta, 2.0**n, 2.0 ** (n + 1), level)
        shells.append((n, c))
        total += c
        if rel_stop is not None and n >= 3 and c < rel_stop * total:
            converged = True
            break
        n += 1
    return total, shells, converged


def cone_integral(alpha, delta=1.0, pair="quadrants", mode="integral", levels=(1, 2), max_shells=80,
                  rel_stop=1e-4, shell_range=None, offset=(0.0, 0.0), lattice_radius=24):
    """Outer integral int_{K1} (int_{K2} (1+|t-s|)^{-alpha} ds)^{delta/2} dt.

    Parameters
    ----------
    mode : {"integral", "shells", "lattice_sum"}
        ``integral`` extends dyadic shells until the last one falls below
        ``rel_stop`` of the running total, at two refinement levels;
        ``shells`` returns contributions c_n of shells 2^n < |t| < 2^{n+1}
        for n in ``shell_range``; ``lattice_sum`` sums over K1 ∩ (Z^2 + offset)
        up to ``lattice_radius`` and adds the continuum beyond.

    Raises
    ------
    SlowConvergence
        When a claimed-convergent (alpha, delta) does not meet ``rel_stop``
        within ``max_shells``.
    """
    if pair not in CONE_PAIRS:
        raise PreconditionError(f"unknown cone pair {pair!r}; choose from {sorted(CONE_PAIRS)}")
    if delta <= 0:
        raise PreconditionError("delta must be positive")
    k1, k2 = CONE_PAIRS[pair]
    claim = alpha > convergence_threshold(delta)
    if mode == "shells":
        rng_ = range(4, 9) if shell_range is None else shell_range
        shells = [(n, _shell_integral(k1, k2, alpha, delta, 2.0**n, 2.0 ** (n + 1), levels[0])) for n in rng_]
        return ConeResult(pair, alpha, delta, mode, math.nan, shells, claim, False)
    if not claim:
        raise PreconditionError(
            f"alpha={alpha} <= {convergence_threshold(delta):g}: integral diverges, use mode='shells'"
        )
    if mode == "integral":
        values = []
        for lv in levels:
            total, shells, conv = _shell_series(k1, k2, alpha, delta, lv, max_shells, rel_stop)
            if not conv:
                raise SlowConvergence(f"shell contributions did not decay below {rel_stop} in {max_shells} shells")
            values.append((total, shells))
        change = abs(values[-1][0] - values[0][0]) / values[-1][0] if len(values) > 1 else None
        return ConeResult(pair, alpha, delta, mode, values[-1][0], values[-1][1], claim, True, change)
    if mode == "lattice_sum":
        return _lattice_sum(k1, k2, alpha, delta, offset, lattice_radius, levels[0], max_shells, rel_stop, pair)
    raise PreconditionError(f"unknown mode {mode!r}")


def _lattice_sum(k1, k2, alpha, delta, offset, radius, level, max_shells, rel_stop, pair):
    idx = np.arange(-radius - 1, radius + 2)
    i, j = np.meshgrid(idx, idx, indexing="ij")
    pts = np.stack([i.ravel() + offset[0], j.ravel() + offset[1]], axis=1)
    keep = k1.contains(pts) & (np.hypot(pts[:, 0], pts[:, 1]) <= radius)
    direct = sum(inner_integral(p, k2, alpha, 16 * level, 8) ** (0.5 * delta) for p in pts[keep])
    # continuum tail beyond the summed disk, shell by shell
    tail = 0.0
    r = float(radius)
    shells = []
    for n in range(max_shells):
        c = _shell_integral(k1, k2, alpha, delta, r, 2 * r, level)
        shells.append((n, c))
        tail += c
        r *= 2
        if c < rel_stop * (direct + tail):
            break
    else:
        raise SlowConvergence("lattice-sum tail did not converge")
    return ConeResult(pair, alpha, delta, "lattice_sum", float(direct + tail), shells, True, True,
                      offsets=[tuple(map(float, offset))])
