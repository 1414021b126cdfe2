"""Monte Carlo experiments on GEF zeros and the log-modulus field at desk scale."""

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.special import logsumexp

from ._seeding import child_seed
from .errors import InsufficientSamples, PreconditionError, WindingMismatch
from .fields import Lattice
from .gef import (
    EULER_GAMMA,
    FieldQuadrature,
    bump_test_function,
    find_zeros,
    linear_statistic,
    sample_gef,
    truncation_order,
)
from .results import EstimatorResult, jackknife, mean_and_stderr

ZETA3 = float(special.zeta(3.0))
MAX_DESK_RADIUS = 8.0


@dataclass(frozen=True)
class Constants:
    euler_gamma: float
    zeta3: float
    sigma: float
    sigma_x: float
    sigma_sq: float
    sigma_x_sq: float


def constants():
    """Variance constants of the zero counts (sigma) and of the field X (sigma_X)."""
    sigma_sq = ZETA3 / (16.0 * math.pi)
    sigma_x_sq = math.pi * ZETA3 / 4.0
    return Constants(EULER_GAMMA, ZETA3, math.sqrt(sigma_sq), math.sqrt(sigma_x_sq), sigma_sq, sigma_x_sq)


def worker_count():
    """Worker processes from ``GEFSPLIT_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("GEFSPLIT_WORKERS", "1")))
    except ValueError:
        return 1


def _chunks(start, samples, workers):
    size = max(1, math.ceil(samples / (4 * workers)))
    return [(s, min(size, start + samples - s)) for s in range(start, start + samples, size)]


def _run(task, args_list, workers):
    if workers <= 1 or len(args_list) <= 1:
        return [task(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, *zip(*args_list)))


# ---------------------------------------------------------------------------
# per-sample kernels (module level so they pickle)


def _count_chunk(radius, seed, start, count):
    order = truncation_order(radius + 2.0)
    out = np.full(count, -1, dtype=np.int64)
    for k in range(count):
        try:
            out[k] = find_zeros(sample_gef(order, seed, start + k), radius).zeros.size
        except WindingMismatch:
            pass
    return out


def _deviation_chunk(r, h, seed, start, count):
    radius = r * h.support_radius
    order = truncation_order(radius + 2.0)
    out = np.full(count, np.nan)
    for k in range(count):
        try:
            zs = find_zeros(sample_gef(order, seed, start + k), radius)
        except WindingMismatch:
            continue
        out[k] = linear_statistic(zs, h, r).deviation
    return out


def _field_chunk(r, h, spacing, seed, start, count):
    radius = r * h.support_radius
    lat = Lattice(spacing, radius)
    quad = FieldQuadrature(h, r, lat)
    order = truncation_order(radius + 2.0)
    out = np.empty(count)
    singular = 0
    for k in range(count):
        x, sing = quad.x_values(sample_gef(order, seed, start + k))
        v, s = quad.integral(x, sing)
        out[k] = v
        singular += s
    return out, singular


def zero_counts(radius, samples, seed=0, start=0, workers=None):
    """Zero counts in |z| <= radius; failed samples are returned as -1."""
    workers = worker_count() if workers is None else workers
    parts = _run(_count_chunk, [(radius, seed, s, c) for s, c in _chunks(start, samples, workers)], workers)
    return np.concatenate(parts)


def zero_deviations(r, h, samples, seed=0, start=0, workers=None):
    """Deviations n(r,h) - (r^2/pi) int h; failed samples are NaN."""
    if r * h.support_radius > MAX_DESK_RADIUS + 1e-12:
        raise PreconditionError(f"r * support must be <= {MAX_DESK_RADIUS} at desk scale")
    workers = worker_count() if workers is None else workers
    parts = _run(_deviation_chunk, [(r, h, seed, s, c) for s, c in _chunks(start, samples, workers)], workers)
    return np.concatenate(parts)


def field_integrals(r, h, samples, seed=0, spacing=None, workers=None):
    """S = int h(z/r) X_z dz by the lattice midpoint rule; returns (S, singular node count)."""
    spacing = r * h.support_radius / 50.0 if spacing is None else spacing
    workers = worker_count() if workers is None else workers
    parts = _run(_field_chunk, [(r, h, spacing, seed, s, c) for s, c in _chunks(0, samples, workers)], workers)
    return np.concatenate([p[0] for p in parts]), int(sum(p[1] for p in parts))


def _clean(values, name):
    ok = np.isfinite(values) if values.dtype.kind == "f" else values >= 0
    failures = int(np.size(values) - np.count_nonzero(ok))
    kept = values[ok]
    if kept.size < 2:
        raise InsufficientSamples(f"{name}: fewer than two usable samples")
    return kept, failures


# ---------------------------------------------------------------------------
# experiments


def mean_count_experiment(radius=5.0, samples=5000, seed=1, tolerance=0.02):
    """Mean zero count in the disk of given radius against radius^2."""
    if radius > MAX_DESK_RADIUS:
        raise PreconditionError(f"radius must be <= {MAX_DESK_RADIUS}")
    s = child_seed(seed, "mean-count")
    counts, failures = _clean(zero_counts(radius, samples, s), "mean-count")
    m, se = mean_and_stderr(counts)
    target = radius * radius
    res = EstimatorResult("mean-count", m, se, int(counts.size), seed, target, "E n = r^2 (unit intensity / pi)",
                          params={"R": radius, "samples": samples}, extra={"winding_failures": failures})
    res.judge(tolerance * target)
    return res


def variance_estimate(deviations, r, h):
    """r^2 Var(deviation) / ||Lap h||^2 with a jackknife standard error."""
    dev = np.asarray(deviations, dtype=float)
    stat = lambda d: r * r * np.var(d, ddof=1) / h.norm_lap_sq  # noqa: E731
    return jackknife(stat, dev)


def variance_experiment(r=8.0, h=None, samples=20_000, seed=1, tolerance=0.15, deviations=None):
    """Normalized variance of the zero linear statistic against zeta(3)/(16 pi).

    ``deviations`` may be supplied to reuse samples already drawn for the
    same (r, h, seed).
    """
    h = bump_test_function() if h is None else h
    if deviations is None:
        deviations = zero_deviations(r, h, samples, child_seed(seed, "linear-statistic"))
    dev, failures = _clean(np.asarray(deviations), "variance")
    est, se = variance_estimate(dev, r, h)
    target = constants().sigma_sq
    res = EstimatorResult("variance", float(est), float(se), int(dev.size), seed, target, "sigma^2 = zeta(3)/(16 pi)",
                          params={"r": r, "h": h.name, "samples": samples},
                          extra={"winding_failures": failures, "ratio": float(est / target)})
    res.judge(tolerance * target)
    return res


def clt_statistics(values):
    """Skewness, excess kurtosis and KS distance of empirically standardized values."""
    x = np.asarray(values, dtype=float)
    n = x.size
    z = (x - x.mean()) / x.std(ddof=1)
    ks = stats.kstest(z, "norm").statistic
    return {
        "n": n,
        "skewness": float(stats.skew(z)),
        "excess_kurtosis": float(stats.kurtosis(z)),
        "ks_distance": float(ks),
        "skewness_band": 4.0 * math.sqrt(6.0 / n),
        "kurtosis_band": 4.0 * math.sqrt(24.0 / n),
        "ks_band": 1.6 / math.sqrt(n),
    }


def clt_experiment(r=8.0, h=None, samples=20_000, seed=1, deviations=None):
    """Shape diagnostics of the standardized zero linear statistic.

    Standardization uses the sample mean and deviation, so these numbers
    test the shape of the law only; the scale is tested by the variance
    experiment.
    """
    h = bump_test_function() if h is None else h
    if deviations is None:
        deviations = zero_deviations(r, h, samples, child_seed(seed, "linear-statistic"))
    dev, failures = _clean(np.asarray(deviations), "clt")
    out = clt_statistics(dev)
    out["passed"] = {
        "skewness": abs(out["skewness"]) <= out["skewness_band"],
        "excess_kurtosis": abs(out["excess_kurtosis"]) <= out["kurtosis_band"],
        "ks_distance": out["ks_distance"] < out["ks_band"],
    }
    out["winding_failures"] = failures
    out["params"] = {"r": r, "h": h.name, "samples": samples, "seed": seed}
    return out


def tail_reference(c):
    """1 - Phi(c) and (1/c^2) log(1 - Phi(c))."""
    p = float(special.ndtr(-c))
    return p, (math.log(p) / (c * c) if c > 0 else math.nan)


def md_experiment(r=8.0, h=None, c_list=(1.0, 1.5, 2.0), samples=200_000, seed=1, deviations=None, width=4.0):
    """Tail frequencies of the standardized deviation r (n - E n) / (sigma ||Lap h||).

    Each c is judged by |P(>= c) - (1 - Phi(c))| <= width * binomial stderr,
    the stderr evaluated at the Gaussian reference probability.
    """
    h = bump_test_function() if h is None else h
    if deviations is None:
        deviations = zero_deviations(r, h, samples, child_seed(seed, "linear-statistic"))
    dev, failures = _clean(np.asarray(deviations), "md")
    n = dev.size
    scale = constants().sigma * math.sqrt(h.norm_lap_sq) / r
    z = dev / scale
    rows = []
    for c in c_list:
        hits = int(np.count_nonzero(z >= c))
        p_hat = hits / n
        ref, ref_rate = tail_reference(c)
        se = math.sqrt(ref * (1 - ref) / n)
        if hits < 30:
            warnings.warn(f"only {hits} exceedances at c={c}", RuntimeWarning, stacklevel=2)
        rows.append({
            "c": float(c),
            "p_hat": p_hat,
            "exceedances": hits,
            "gaussian_tail": ref,
            "stderr": se,
            "rate_hat": math.log(p_hat) / (c * c) if hits and c > 0 else math.nan,
            "rate_reference": ref_rate,
            "passed": abs(p_hat - ref) <= width * se,
        })
    return {"rows": rows, "n": n, "winding_failures": failures,
            "params": {"r": r, "h": h.name, "samples": samples, "seed": seed}}


def cgf_ratio(values, lam, r):
    """(1 / (r^2 lam^2)) log mean exp(lam S), computed with log-sum-exp."""
    s = np.asarray(values, dtype=float)
    return (logsumexp(lam * s) - math.log(s.size)) / (r * r * lam * lam)


def small_lambda(values, budget=1.0):
    """lam with lam * max|S| = budget (kept below 5 for overflow safety)."""
    return float(budget / np.max(np.abs(values)))


def linear_response_experiment(r=8.0, h=None, lambdas=None, samples=4000, seed=1, form="field",
                               tolerance=0.2, values=None, spacing=None):
    """Normalized cumulant generating function of S against its Gaussian limit.

    ``form="field"``: S = int h(z/r) X_z dz, target ||h||^2 sigma_X^2 / 2.
    ``form="zeros"``: S = r^2 (n - E n), target ||Lap h||^2 sigma^2 / 2.

    Returns an EstimatorResult for the symmetrized ratio at the smallest
    |lambda| with per-lambda values, a lambda^2 -> 0 extrapolation and the
    direct variance in ``extra``.
    """
    h = bump_test_function() if h is None else h
    k = constants()
    if values is None:
        if form == "field":
            values, singular = field_integrals(r, h, samples, child_seed(seed, "field-integral"), spacing)
        elif form == "zeros":
            values = r * r * zero_deviations(r, h, samples, child_seed(seed, "linear-statistic"))
            singular = 0
        else:
            raise PreconditionError("form must be 'field' or 'zeros'")
    else:
        singular = 0
    s, failures = _clean(np.asarray(values, dtype=float), "linear-response")
    target = 0.5 * (h.norm_h_sq * k.sigma_x_sq if form == "field" else h.norm_lap_sq * k.sigma_sq)
    if lambdas is None:
        base = small_lambda(s)
        lambdas = [base * f for f in (0.25, 0.5, 1.0)]
    lambdas = sorted(abs(float(x)) for x in lambdas)
    if lambdas[-1] * np.max(np.abs(s)) >= 5.0:
        raise PreconditionError("lambda * max|S| must stay below 5")

    def sym(data, lam):
        return 0.5 * (cgf_ratio(data, lam, r) + cgf_ratio(data, -lam, r))

    per = []
    for lam in lambdas:
        plus, se_p = jackknife(lambda d: cgf_ratio(d, lam, r), s)
        minus, se_m = jackknife(lambda d: cgf_ratio(d, -lam, r), s)
        both, se_b = jackknife(lambda d: sym(d, lam), s)
        odd, se_o = jackknife(lambda d: cgf_ratio(d, lam, r) - cgf_ratio(d, -lam, r), s)
        per.append({"lambda": lam, "plus": plus, "plus_stderr": se_p, "minus": minus, "minus_stderr": se_m,
                    "symmetric": both, "symmetric_stderr": se_b, "odd_difference": odd, "odd_stderr": se_o,
                    "max_share": float(np.max(np.exp(lam * s - logsumexp(lam * s))))})
        if per[-1]["max_share"] > 0.5:
            warnings.warn(f"CGF at lambda={lam} is dominated by one sample", RuntimeWarning, stacklevel=2)

    lam2 = np.array(lambdas) ** 2

    def extrapolate(data):
        vals = np.array([sym(data, lam) for lam in lambdas])
        if len(lambdas) == 1:
            return vals[0]
        return np.polyfit(lam2, vals, 1)[1]

    limit, limit_se = jackknife(extrapolate, s)
    direct, direct_se = jackknife(lambda d: np.var(d) / (2 * r * r), s)
    head = per[0]
    res = EstimatorResult(
        f"linear-response-{form}", float(head["symmetric"]), float(head["symmetric_stderr"]), int(s.size), seed,
        target, "||h||^2 sigma_X^2 / 2" if form == "field" else "||Lap h||^2 sigma^2 / 2",
        params={"r": r, "h": h.name, "form": form, "lambdas": lambdas, "samples": samples},
        extra={"per_lambda": per, "lambda0_limit": float(limit), "lambda0_stderr": float(limit_se),
               "direct_variance_ratio": float(direct), "direct_stderr": float(direct_se),
               "lambda0_consistent": bool(abs(limit - direct) <= 2 * max(limit_se, 1e-300)),
               "singular_nodes": singular, "failures": failures, "ratio": float(head["symmetric"] / target)},
    )
    res.judge(tolerance * target)
    return res
