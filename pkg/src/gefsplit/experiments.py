"""Catalog of runnable experiments shared by the command line and the acceptance tests.

Every runner takes a parameter dict and returns an :class:`ExperimentReport`
whose records are flat JSON-ready dicts with a ``pass`` flag.
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds, fields, gef, smeared, splits, stats
from ._seeding import child_seed
from .errors import PreconditionError
from .results import _plain


@dataclass
class ExperimentReport:
    name: str
    records: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # file stem -> (header, rows)

    def add(self, check, passed, estimate=None, stderr=None, n=None, target=None, target_source=None,
            criterion=None, **extra):
        rec = {
            "name": f"{self.name}/{check}",
            "criterion": criterion,
            "estimate": estimate,
            "stderr": stderr,
            "n": n,
            "target": target,
            "target_source": target_source,
            "pass": None if passed is None else bool(passed),
        }
        if extra:
            rec["extra"] = extra
        self.records.append(_plain(rec))
        return rec

    @property
    def passed(self):
        return all(r["pass"] is not False for r in self.records)

    def failures(self):
        return [r["name"] for r in self.records if r["pass"] is False]


@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    summary: str
    defaults: dict
    runner: Callable
    criterion: int = None
    check: Callable = None  # extra preconditions specific to this experiment

    def resolve(self, **params):
        """Defaults overlaid with ``params``, validated; raises before any sampling."""
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise PreconditionError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        merged = dict(self.defaults)
        merged.update(params)
        validate(merged)
        if self.check is not None:
            self.check(merged)
        return merged

    def run(self, **params):
        merged = self.resolve(**params)
        report = self.runner(merged)
        for rec in report.records:
            rec["params"] = _plain(merged)
            rec["seed"] = merged.get("seed")
        return report


_TEST_FUNCTIONS = ("bump", "bump4")


def _require(cond, msg):
    if not cond:
        raise PreconditionError(msg)


def validate(p):
    """Precondition checks shared by all experiments, keyed on parameter name."""
    for key in ("samples", "samples_equality", "chunk", "models", "y_points"):
        if key in p:
            _require(isinstance(p[key], int) and p[key] >= 2, f"{key} must be an integer >= 2")
    if "n" in p:
        _require(isinstance(p["n"], int) and p["n"] >= 1, "n must be a positive integer")
    if "seed" in p:
        _require(isinstance(p["seed"], int) and p["seed"] >= 0, "seed must be a non-negative integer")
    for key in ("r", "R"):
        if key in p:
            _require(0 < p[key] <= stats.MAX_DESK_RADIUS, f"{key} must lie in (0, {stats.MAX_DESK_RADIUS}]")
    for key in ("tolerance", "spacing", "width", "C", "eval_half_extent", "M_pass", "M_fail", "y_min", "y_max"):
        if key in p:
            _require(p[key] > 0, f"{key} must be positive")
    if "alpha" in p:
        _require(p["alpha"] > 2, "alpha must exceed the dimension 2")
    if "epsilon" in p:
        _require(p["epsilon"] > 0, "epsilon must be positive")
    if "growth_eps" in p:
        _require(all(0 < e < math.exp(-4 / 3) for e in p["growth_eps"]), "growth_eps entries must lie in (0, e^-4/3)")
        _require(list(p["growth_eps"]) == sorted(p["growth_eps"], reverse=True), "growth_eps must be decreasing")
    if "h" in p:
        _require(p["h"] in _TEST_FUNCTIONS, f"h must be one of {_TEST_FUNCTIONS}")
    if "form" in p:
        _require(p["form"] in ("field", "zeros"), "form must be 'field' or 'zeros'")
    if "pair" in p:
        _require(p["pair"] in bounds.CONE_PAIRS, f"pair must be one of {sorted(bounds.CONE_PAIRS)}")
    if "transforms" in p:
        _require(set(p["transforms"]) <= set(_TRANSFORMS), f"transforms must be among {list(_TRANSFORMS)}")
    if "transform" in p:
        _require(p["transform"] in _TRANSFORMS, f"transform must be one of {list(_TRANSFORMS)}")
    if "c" in p:
        _require(len(p["c"]) > 0 and all(c > 0 for c in p["c"]), "c list must be non-empty and positive")
    if "lambdas" in p:
        _require(all(lam != 0 for lam in p["lambdas"]), "lambdas must be non-zero")
    if "y_min" in p and "y_max" in p:
        _require(p["y_min"] < p["y_max"] <= 1.0, "need y_min < y_max <= 1")


# ---------------------------------------------------------------------------
# zeros and field statistics


def _mean_count(p):
    rep = ExperimentReport("mean-count")
    res = stats.mean_count_experiment(p["R"], p["samples"], p["seed"], p["tolerance"])
    rep.add("mean", res.passed, res.estimate, res.stderr, res.n_samples, res.target, res.target_source,
            criterion=1, winding_failures=res.extra["winding_failures"], relative_error=res.estimate / res.target - 1)
    return rep


_DEVIATION_CACHE = {}


def linear_statistic_deviations(r, samples, seed, h_kind="bump"):
    """Zero-statistic deviations for (r, seed), cached so experiments can share prefixes."""
    key = (float(r), h_kind, int(seed))
    have = _DEVIATION_CACHE.get(key)
    if have is None or have.size < samples:
        h = gef.bump_test_function(h_kind)
        start = 0 if have is None else have.size
        more = stats.zero_deviations(r, h, samples - start, child_seed(seed, "linear-statistic"), start=start)
        have = more if have is None else np.concatenate([have, more])
        _DEVIATION_CACHE[key] = have
    return have[:samples]


def _variance(p):
    rep = ExperimentReport("variance")
    h = gef.bump_test_function(p["h"])
    dev = linear_statistic_deviations(p["r"], p["samples"], p["seed"], p["h"])
    res = stats.variance_experiment(p["r"], h, p["samples"], p["seed"], p["tolerance"], deviations=dev)
    rep.add("sigma-squared", res.passed, res.estimate, res.stderr, res.n_samples, res.target, res.target_source,
            criterion=2, ratio=res.extra["ratio"], winding_failures=res.extra["winding_failures"])
    return rep


def _clt(p):
    rep = ExperimentReport("clt")
    dev = linear_statistic_deviations(p["r"], p["samples"], p["seed"], p["h"])
    out = stats.clt_experiment(p["r"], gef.bump_test_function(p["h"]), p["samples"], p["seed"], deviations=dev)
    for key, band in (("skewness", "skewness_band"), ("excess_kurtosis", "kurtosis_band"), ("ks_distance", "ks_band")):
        rep.add(key, out["passed"][key], out[key], None, out["n"], 0.0, "standard normal", band=out[band])
    return rep


def _md(p):
    rep = ExperimentReport("moderate-deviations")
    dev = linear_statistic_deviations(p["r"], p["samples"], p["seed"], p["h"])
    out = stats.md_experiment(p["r"], gef.bump_test_function(p["h"]), p["c"], p["samples"], p["seed"], deviations=dev)
    rows = []
    for row in out["rows"]:
        rep.add(f"tail-c={row['c']:g}", row["passed"], row["p_hat"], row["stderr"], out["n"], row["gaussian_tail"],
                "1 - Phi(c)", criterion=10, exceedances=row["exceedances"], rate_hat=row["rate_hat"],
                rate_reference=row["rate_reference"])
        rows.append([row["c"], row["p_hat"], row["gaussian_tail"], row["stderr"], row["rate_hat"], row["rate_reference"]])
    rep.tables["tails"] = (["c", "p_hat", "gaussian_tail", "stderr", "rate_hat", "rate_reference"], rows)
    return rep


def _linear_response(p):
    rep = ExperimentReport("linear-response")
    h = gef.bump_test_function(p["h"])
    res = stats.linear_response_experiment(p["r"], h, p["lambdas"] or None, p["samples"], p["seed"], p["form"],
                                           p["tolerance"])
    ex = res.extra
    rep.add("cgf-ratio", res.passed, res.estimate, res.stderr, res.n_samples, res.target, res.target_source,
            criterion=11, ratio=ex["ratio"], lambdas=res.params["lambdas"])
    rep.add("lambda-to-zero", ex["lambda0_consistent"], ex["lambda0_limit"], ex["lambda0_stderr"], res.n_samples,
            ex["direct_variance_ratio"], "Var(S) / (2 r^2)", criterion=11)
    rows = [[q["lambda"], q["plus"], q["minus"], q["symmetric"], q["symmetric_stderr"], q["odd_difference"],
             q["odd_stderr"]] for q in ex["per_lambda"]]
    rep.tables["cgf"] = (["lambda", "plus", "minus", "symmetric", "stderr", "odd_difference", "odd_stderr"], rows)
    return rep


# ---------------------------------------------------------------------------
# field core and splits

_COV_POINTS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-0.5, 0.5), (1.0, -1.0), (-1.0, -0.5))


def _gef_covariance(p):
    rep = ExperimentReport("gef-covariance")
    kernel = fields.gef_kernel_spec()
    pts = np.array(_COV_POINTS)
    reach = kernel.truncation_radius()
    half = p["spacing"] * math.ceil((np.max(np.abs(pts)) + reach) / p["spacing"])
    lat = fields.Lattice(p["spacing"], half)
    chunk = 5000
    vals = []
    seed = child_seed(p["seed"], "gef-covariance")
    for start in range(0, p["samples"], chunk):
        m = min(chunk, p["samples"] - start)
        noise = fields.sample_white_noise(lat, "complex", seed, samples=m, start=start)
        vals.append(fields.synthesize_nonstationary(kernel, noise, pts).values)
    est = fields.empirical_covariance(np.concatenate(vals), batches=200)
    exact = fields.gef_covariance(pts[:, None, :], pts[None, :, :])
    rows = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = est.matrix[i, j] - exact[i, j]
            ok = abs(d.real) <= 4 * est.stderr_re[i, j] and abs(d.imag) <= 4 * est.stderr_im[i, j]
            rep.add(f"pair{i}{j}", ok, est.matrix[i, j], [est.stderr_re[i, j], est.stderr_im[i, j]], est.n_samples,
                    exact[i, j], "exp(-i s^t - |s-t|^2/2)", criterion=3, s=pts[i], t=pts[j])
            rows.append([*pts[i], *pts[j], est.matrix[i, j].real, est.matrix[i, j].imag, exact[i, j].real,
                         exact[i, j].imag, est.stderr_re[i, j], est.stderr_im[i, j]])
    diag = np.real(np.diag(est.matrix))
    rep.add("unit-variance", None, diag, None, est.n_samples, 1.0, "E|G_t|^2 = 1")
    rep.tables["pairs"] = (["s1", "s2", "t1", "t2", "re", "im", "re_exact", "im_exact", "se_re", "se_im"], rows)
    return rep


_LEAK_POINTS = ((1.0, 1.0), (-1.0, 1.0), (2.0, -1.0), (-2.0, -2.0), (1.0, 2.0), (0.0, -1.0))


def _split_setup(p):
    kernel = fields.power_decay_kernel(p["alpha"])
    reach = int(math.ceil(kernel.truncation_radius() / p["spacing"] - 1e-12))
    half = p["spacing"] * (reach + round(p["eval_half_extent"] / p["spacing"]))
    return kernel, fields.Lattice(p["spacing"], half)


def _leak_covariance(p):
    rep = ExperimentReport("leak-covariance")
    kernel, lat = _split_setup(p)
    seed = child_seed(p["seed"], "leak-covariance")
    pts = np.array(_LEAK_POINTS)
    got = {1: [], 2: [], 12: []}
    sub = reach_cells = None
    for start in range(0, p["samples"], p["chunk"]):
        m = min(p["chunk"], p["samples"] - start)
        noise = splits.two_split_noise(lat, "real", seed, m, start)
        sf = splits.split_fields(kernel, noise, p["eval_half_extent"])
        lk = splits.leaks_from_members(sf.members, sf.lattice)
        sub, reach_cells = sf.lattice, sf.reach_cells
        idx = [sub.node_index(q) for q in pts]
        for which, arr in ((1, lk.g1), (2, lk.g2), (12, lk.g12)):
            got[which].append(np.stack([arr[(slice(None),) + tuple(ix)] for ix in idx], axis=1))
    rows = []
    for which in (1, 2, 12):
        est = fields.empirical_covariance(np.concatenate(got[which]), batches=100)
        pred = np.real(splits.leak_covariance_prediction(kernel, lat, pts, which, reach_cells))
        worst = 0.0
        ok = True
        for i in range(len(pts)):
            for j in range(i, len(pts)):
                z = (est.matrix[i, j].real - pred[i, j]) / est.stderr_re[i, j] if est.stderr_re[i, j] > 0 else (
                    0.0 if abs(est.matrix[i, j].real - pred[i, j]) < 1e-12 else math.inf)
                worst = max(worst, abs(z))
                ok &= abs(z) <= 4
                rows.append([which, i, j, est.matrix[i, j].real, pred[i, j], est.stderr_re[i, j]])
        label = {1: "G1", 2: "G2", 12: "G12"}[which]
        rep.add(label, ok, float(np.real(est.matrix[0, 0])), float(est.stderr_re[0, 0]), est.n_samples,
                float(pred[0, 0]), "leak kernel applied to white noise", criterion=4, worst_z=worst)
    rep.tables["entries"] = (["leak", "i", "j", "empirical", "predicted", "stderr"], rows)
    return rep


_TRANSFORMS = {
    "identity": splits.identity,
    "abs": splits.absolute,
    "relu": splits.relu,
    "clip": lambda: splits.clip(0.5),
    "tent": splits.tent,
    "scale": lambda: splits.scale(0.75),
}


def _pathwise(p):
    rep = ExperimentReport("pathwise")
    kernel, lat = _split_setup(p)
    seed = child_seed(p["seed"], "pathwise")
    flags = {"fnz-gluing": True, "leak-commutation": True, "lipschitz-domination": True, "quadruple-bound": True}
    worst = {"lipschitz-domination": -math.inf, "quadruple-bound": -math.inf}
    for start in range(0, p["samples"], p["chunk"]):
        m = min(p["chunk"], p["samples"] - start)
        noise = splits.two_split_noise(lat, "real", seed, m, start)
        flags["fnz-gluing"] &= splits.check_fnz_gluing(noise)
        sf = splits.split_fields(kernel, noise, p["eval_half_extent"])
        lk = splits.leaks_from_members(sf.members, sf.lattice)
        flags["leak-commutation"] &= splits.check_leak_commutation(lk)
        for tname in p["transforms"]:
            tr = _TRANSFORMS[tname]()
            y = splits.apply_pointwise(tr, sf)
            ok, ex = splits.check_lipschitz_domination(lk, y.leaks, tr.lipschitz)
            flags["lipschitz-domination"] &= ok and splits.check_leak_commutation(y.leaks)
            worst["lipschitz-domination"] = max(worst["lipschitz-domination"], ex)
            ok, ex = splits.check_quadruple_bound(sf.members, y.members, sf.lattice, tr.lipschitz)
            flags["quadruple-bound"] &= ok
            worst["quadruple-bound"] = max(worst["quadruple-bound"], ex)
    nodes = p["samples"] * sf.lattice.size
    for key, ok in flags.items():
        rep.add(key, ok, None, None, p["samples"], None, "exact identity", criterion=5, nodes=nodes,
                worst_excess=worst.get(key))
    # convolution domination on a one-dimensional split
    k1 = fields.gaussian_kernel(1.0, dim=1)
    lat1 = fields.Lattice(0.25, 12.0, dim=1)
    mu = [(-2, 0.25), (-1, -0.5), (0, 1.0), (1, 0.375), (3, -0.125)]
    ok_all, worst_c, exact = True, -math.inf, True
    for start in range(0, p["samples"], p["chunk"]):
        m = min(p["chunk"], p["samples"] - start)
        triple = splits.split_noise_1d(lat1, "real", child_seed(seed, "conv"), m, start)
        pos, members = splits.split_fields_1d(k1, triple, 4.0)
        cs = splits.convolve_split(mu, members, pos)
        ok_all &= cs.dominated
        worst_c = max(worst_c, cs.worst_excess)
        exact &= cs.exact
    rep.add("convolution-domination", ok_all and exact, None, None, p["samples"], None, "exact inequality",
            criterion=5, worst_excess=worst_c, exact_arithmetic=exact)
    return rep


def _splittability(p):
    rep = ExperimentReport("splittability")
    kernel = fields.gaussian_kernel(p["width"])
    reach = kernel.truncation_radius()
    half = p["spacing"] * math.ceil((p["eval_half_extent"] + reach) / p["spacing"])
    lat = fields.Lattice(p["spacing"], half)
    tr = _TRANSFORMS[p["transform"]]()
    out = splits.verify_splittability_conditions(kernel, tr, p["C"], lat, p["samples"], p["seed"],
                                                 eval_half_extent=p["eval_half_extent"])
    for key in ("a1", "a2", "a3", "a4", "b"):
        r = out[key]
        tgt = 2.0 if key != "b" else 0.0
        rep.add(key, r["pass"], r["estimate"], r["stderr"], r["n"], tgt,
                "<= 2" if key != "b" else "mean zero", region=r["region"], tail_exponent_bound=r["tail_exponent_bound"])
    return rep


# ---------------------------------------------------------------------------
# smeared condition, noisy lattices, bounds


def _smeared(p):
    rep = ExperimentReport("smeared-lipschitz")
    cases = (
        ("complex-log", smeared.complex_log_psi(), 1.0, "bounded"),
        ("real-half-log", smeared.real_half_log_psi(), 0.5, "bounded"),
        ("real-log", smeared.real_log_psi(), 1.0, "unbounded"),
    )
    y = np.logspace(math.log10(p["y_min"]), math.log10(p["y_max"]), p["y_points"])
    for label, psi, delta, expect in cases:
        res = smeared.smeared_constant(psi, delta, y)
        rep.add(label, res.verdict == expect, res.constant, float(np.max(res.errors)), len(y), None,
                f"ratio g(y)/|y|^{delta:g} {expect}", criterion=6, verdict=res.verdict,
                growth_ratio=res.growth_ratio)
        rep.tables[label] = (["y", "g", "ratio"], [[a, b, c] for a, b, c in zip(np.abs(res.y), res.g, res.ratio)])
    return rep


def _noisy(p):
    rep = ExperimentReport("noisy-lattice")
    eps = p["epsilon"]
    rows = []
    for M, expect in ((p["M_pass"], True), (p["M_fail"], False)):
        cov = smeared.lattice_covariance("gef", M, p["n"])
        res = smeared.noisy_gaussian_check(cov, eps, M)
        rep.add(f"M={M:g}", res.passed == expect, res.min_eigenvalue, None, res.size, 0.0,
                "min eig((1+eps)^2 Sigma - I) >= 0" if expect else "expected to fail", criterion=7,
                noisy=res.passed)
    prev = -math.inf
    mono = True
    for M in (1.0, 2.0, 3.0, 4.0):
        lam = smeared.noisy_gaussian_check(smeared.lattice_covariance("gef", M, p["n"]), eps, M).min_eigenvalue
        mono &= lam >= prev - 1e-12
        prev = lam
        rows.append([M, lam])
    rep.add("monotone-in-M", mono, None, None, 4, None, "nondecreasing along M = 1..4")
    rep.tables["eigenvalues"] = (["M", "min_eigenvalue"], rows)
    return rep


def _exp_bounds(p):
    rep = ExperimentReport("exp-moment-bounds")
    tight1 = bounds.gaussian_exp_moment_bound(1.0, "tight")
    ref = 2.0 * math.exp(0.5) * 0.5 * math.erfc(-1.0 / math.sqrt(2.0))
    rep.add("tight-at-1", abs(tight1 - ref) <= 1e-4, tight1, None, None, ref, "2 e^{1/2} Phi(1)", criterion=8)
    full = bounds.mc_exp_moment_vs_bound(bounds.fully_correlated_model(), p["samples_equality"], p["seed"])
    rel = abs(full.estimate / full.analytic - 1)
    rep.add("equality-fully-correlated", rel <= 0.01, full.estimate, full.stderr, full.n_samples, full.analytic,
            "tight bound at C = 1", criterion=8, relative_gap=rel)
    rows = []
    for model in bounds.random_covariance_models(p["models"], p["seed"]):
        r = bounds.mc_exp_moment_vs_bound(model, p["samples"], p["seed"])
        rep.add(f"model:{model.name}", r.passed, r.estimate, r.stderr, r.n_samples, r.analytic,
                "MC <= tight bound + 3 stderr", criterion=8, C=r.params["C"], heavy_tail=r.extra["heavy_tail"])
        rows.append([model.name, r.params["C"], r.estimate, r.stderr, r.analytic])
    grid = np.linspace(0, 5, 51)
    chain = all(bounds.gaussian_exp_moment_bound(c) <= bounds.gaussian_exp_moment_bound(c, "weak") * (1 + 1e-12)
                for c in grid)
    rep.add("tight<=weak", chain, None, None, len(grid), None, "chain of bounds")
    rep.tables["models"] = (["model", "C", "estimate", "stderr", "tight_bound"], rows)
    return rep


def _cone(p):
    rep = ExperimentReport("cone-integral")
    pair = p["pair"]
    a = bounds.cone_integral(7.0, 1.0, pair)
    rep.add("alpha=7,delta=1", a.refinement_change < 0.01, a.value, None, None, None,
            "finite, refinement change < 1%", criterion=9, refinement_change=a.refinement_change)
    s = bounds.cone_integral(5.0, 1.0, pair, mode="shells", shell_range=range(4, 9))
    ratios = s.shell_ratios
    target = 2 ** 0.5
    rep.add("alpha=5 shell ratio", all(abs(q / target - 1) <= 0.1 for q in ratios), ratios[-1], None, len(ratios),
            target, "2^{(6-alpha)/2}", criterion=9, ratios=ratios)
    conv = bounds.cone_integral(11.0, 0.5, pair)
    grow = bounds.cone_integral(9.0, 0.5, pair, mode="shells", shell_range=range(4, 9))
    rep.add("delta=1/2 alpha=11", conv.converged and conv.refinement_change < 0.01, conv.value, None, None, None,
            "converges above 2(1+2/delta) = 10", criterion=9, refinement_change=conv.refinement_change)
    rep.add("delta=1/2 alpha=9", all(q > 1 for q in grow.shell_ratios), grow.shell_ratios[-1], None, None,
            2 ** 0.25, "shell growth below the threshold", criterion=9, ratios=grow.shell_ratios)
    rep.tables["shells-alpha5"] = (["n", "c_n"], [list(x) for x in s.shells])
    rep.tables["shells-alpha7"] = (["n", "c_n"], [list(x) for x in a.shells])
    return rep


def _centering(p):
    rep = ExperimentReport("centering")
    for label, psi, crit in (("complex-log", smeared.complex_log_psi(), 12), ("real-log", smeared.real_log_psi(), None),
                             ("real-half-log", smeared.real_half_log_psi(), None)):
        v, err = smeared.centering_check(psi)
        rep.add(label, abs(v) <= p["tolerance"], v, err, None, 0.0, "int psi d gamma = 0", criterion=crit)
    return rep


def _counterexample(p):
    rep = ExperimentReport("counterexample")
    prof = smeared.counterexample_profile(p["n"], p["epsilon"], p["samples"], p["seed"])
    target = math.exp(-1.0)
    ok = abs(prof.normalized_p_a - target) <= 3 * prof.normalized_p_a_stderr
    rep.add("P(A)/eps^4", ok, prof.normalized_p_a, prof.normalized_p_a_stderr, p["samples"], target, "e^{-1}",
            criterion=13, exact_finite_eps=prof.p_a_exact / prof.epsilon**4)
    rows = []
    norm = []
    for eps in p["growth_eps"]:
        q = smeared.counterexample_profile(p["n"], eps)
        big = math.log(1 / eps)
        norm.append(q.lower_bound / big ** (1 + 1 / p["n"]))
        rows.append([eps, q.a, q.b, q.pointwise_gap, q.lower_bound, norm[-1]])
    limit = ((0.75) ** (1 / p["n"]) - 0.25 ** (1 / p["n"])) / 4
    increasing = all(b > a for a, b in zip(norm, norm[1:]))
    lbs = [r[4] for r in rows]
    ok = increasing and norm[-1] > 0 and norm[-1] < limit and all(b > a for a, b in zip(lbs, lbs[1:]))
    rep.add("lower-bound-growth", ok, norm[-1], None, len(rows), limit, "(log 1/eps)^{1+1/n} growth",
            criterion=13, normalized=norm, lower_bounds=lbs)
    rep.tables["profile"] = (["epsilon", "a", "b", "gap", "lower_bound", "normalized"], rows)
    return rep


def _counterexample_check(p):
    _require(p["epsilon"] < math.exp(-4 / 3), "epsilon must lie in (0, e^-4/3)")


EXPERIMENTS = {
    e.name: e
    for e in [
        Experiment("mean-count", "E n = r^2: unit zero intensity of the GEF (divided by pi per unit area)",
                   "mean zero count in |z| <= R", {"R": 5.0, "samples": 5000, "seed": 1, "tolerance": 0.02},
                   _mean_count, 1),
        Experiment("variance", "σ² = ζ(3)/(16π) for the zero linear statistic",
                   "r^2 Var(n(r,h)) / ||Lap h||^2", {"r": 8.0, "h": "bump", "samples": 20000, "seed": 1,
                                                      "tolerance": 0.15}, _variance, 2),
        Experiment("clt", "asymptotic normality of the zero linear statistic",
                   "skewness, excess kurtosis, KS distance", {"r": 8.0, "h": "bump", "samples": 20000, "seed": 1},
                   _clt),
        Experiment("moderate-deviations", "(1/c^2) log P(stat >= c) -> -1/2, Gaussian tail surrogate",
                   "tail frequencies vs 1 - Phi(c)", {"r": 8.0, "h": "bump", "samples": 200000, "seed": 1,
                                                      "c": [1.0, 1.5, 2.0]}, _md, 10),
        Experiment("linear-response", "(1/(r^2 lam^2)) log E exp(lam S) -> ||h||^2 sigma_X^2 / 2",
                   "normalized cumulant generating function", {"r": 8.0, "h": "bump", "samples": 4000, "seed": 1,
                                                               "form": "field", "lambdas": [],
                                                               "tolerance": 0.2}, _linear_response, 11),
        Experiment("gef-covariance", "E G_s conj G_t = exp(-i s^t - |s-t|^2/2) for G = phi * w_C",
                   "empirical GEF covariance from white noise", {"samples": 100000, "seed": 1, "spacing": 0.5},
                   _gef_covariance, 3),
        Experiment("leak-covariance", "leaks G1, G2, G12 are distributed like phi^(k) * w",
                   "leak covariances vs kernel prediction", {"samples": 2000, "seed": 1, "alpha": 7.0,
                                                             "spacing": 1.0, "eval_half_extent": 2.0,
                                                             "chunk": 100}, _leak_covariance, 4),
        Experiment("pathwise", "fnz gluing, G12 = G21, Lipschitz and quadruple-min domination, convolution domination",
                   "exact pathwise identities", {"samples": 1000, "seed": 1, "alpha": 7.0, "spacing": 1.0,
                                                 "eval_half_extent": 2.0, "chunk": 100,
                                                 "transforms": list(_TRANSFORMS)}, _pathwise, 5),
        Experiment("splittability", "exponential-moment conditions (a1)-(a4) and centering (b)",
                   "Monte Carlo splittability check", {"samples": 400, "seed": 1, "width": 1.0, "spacing": 0.25,
                                                      "eval_half_extent": 2.0, "C": 8.0,
                                                      "transform": "tent"}, _splittability),
        Experiment("smeared-lipschitz", "log int exp|psi((x+y)/2)-psi((x-y)/2)| d gamma_h <= C |y|^delta",
                   "g(y)/|y|^delta for log-type psi", {"y_min": 1e-3, "y_max": 1.0, "y_points": 13},
                   _smeared, 6),
        Experiment("noisy-lattice", "Gaussian lattice is noisy: (1+eps)^2 Sigma - I >= 0 for large spacing",
                   "covariance eigenvalue check", {"epsilon": math.sqrt(2) - 1, "n": 5, "M_pass": 3.0,
                                                   "M_fail": 0.3}, _noisy, 7),
        Experiment("exp-moment-bounds", "E exp int|G| <= e^{C^2/2} 2 Phi(C) <= exp(sqrt(2/pi) C + C^2/2)",
                   "Monte Carlo vs tight bound", {"samples": 20000, "samples_equality": 400000, "models": 10,
                                                  "seed": 1}, _exp_bounds, 8),
        Experiment("cone-integral", "int_K1 (int_K2 (1+|t-s|)^-alpha ds)^{delta/2} dt finite iff alpha > 2(1+2/delta)",
                   "cone integrals and dyadic shells", {"pair": "quadrants"}, _cone, 9),
        Experiment("centering", "int (log|z| + gamma_Euler/2) d gamma_C = 0", "centering quadrature",
                   {"tolerance": 1e-10}, _centering, 12),
        Experiment("counterexample", "P(A) ~ e^{-1} eps^4 and integral >= const (log 1/eps)^{1+1/n}",
                   "log-difference counterexample", {"n": 2, "epsilon": 0.05, "samples": 1000000, "seed": 1,
                                                     "growth_eps": [1e-2, 1e-3, 1e-4]}, _counterexample, 13,
                   _counterexample_check),
    ]
}


def get(name):
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}") from None
