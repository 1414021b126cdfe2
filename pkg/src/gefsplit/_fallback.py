"""Pure numpy versions of the compiled kernels (same signatures as ``_core``)."""

import numpy as np


def fstar_eval(zeta, z):
    zeta = np.asarray(zeta, dtype=complex)
    z = np.asarray(z, dtype=complex)
    term = np.exp(-0.5 * (z.real**2 + z.imag**2)).astype(complex)
    val = zeta[0] * term
    der = np.zeros_like(val)
    for k in range(1, zeta.shape[0]):
        rk = np.sqrt(k)
        der += zeta[k] * rk * term
        term = term * z / rk
        val += zeta[k] * term
    return val, der


def _horner(c, w):
    p = np.full(w.shape, c[-1], dtype=complex)
    dp = np.zeros(w.shape, dtype=complex)
    for ck in c[-2::-1]:
        dp = dp * w + p
        p = p * w + ck
    return p, dp


def _newton_ratio(c, rev, w):
    deg = c.shape[0] - 1
    inside = np.abs(w) <= 1.0
    out = np.empty(w.shape, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if inside.any():
            p, dp = _horner(c, w[inside])
            out[inside] = np.where(dp == 0, 0, p / dp)
        if (~inside).any():
            u = 1.0 / w[~inside]
            q, dq = _horner(rev, u)
            out[~inside] = np.where(q == 0, 0, 1.0 / (u * (deg - u * dq / q)))
    return out


def aberth(coeffs, roots, maxiter=200, tol=1e-14):
    """Jacobi-style Aberth sweeps vectorized over the roots; ``roots`` updated in place."""
    c = np.asarray(coeffs, dtype=complex)
    rev = c[::-1].copy()
    deg = c.shape[0] - 1
    done = np.zeros(deg, dtype=bool)
    it = 0
    eye = np.eye(deg, dtype=bool)
    while it < maxiter and not done.all():
        it += 1
        act = ~done
        w = roots[act]
        ratio = _newton_ratio(c, rev, w)
        diff = w[:, None] - roots[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(diff == 0, 0, 1.0 / diff)
        inv[eye[act]] = 0
        s = inv.sum(axis=1)
        corr = ratio / (1.0 - ratio * s)
        new = w - corr
        roots[act] = new
        conv = np.abs(corr) <= tol * (1.0 + np.abs(new))
        idx = np.flatnonzero(act)
        done[idx[conv]] = True
    return it, done
