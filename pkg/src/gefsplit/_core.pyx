# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: damped GEF series evaluation and Aberth root iteration."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, fabs

cnp.import_array()

ctypedef double complex cplx


def fstar_eval(const cplx[::1] zeta, const cplx[::1] z):
    """Damped series F*(z) and its damped derivative F'(z) e^{-|z|^2/2}."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t order = zeta.shape[0]
    cdef Py_ssize_t i, k
    cdef double cr, ci, rk, ik, t, pr, pim
    cdef double[::1] rt = np.sqrt(np.arange(order + 1, dtype=np.float64))
    cdef double[::1] zr = np.ascontiguousarray(np.real(z))
    cdef double[::1] zi = np.ascontiguousarray(np.imag(z))
    cdef double[::1] tr = np.exp(-0.5 * (np.square(zr) + np.square(zi)))
    cdef double[::1] ti = np.zeros(n)
    cdef double[::1] vr = np.empty(n)
    cdef double[::1] vi = np.empty(n)
    cdef double[::1] dr = np.zeros(n)
    cdef double[::1] di = np.zeros(n)
    cr = zeta[0].real
    ci = zeta[0].imag
    for i in range(n):
        vr[i] = cr * tr[i]
        vi[i] = ci * tr[i]
    # terms outer, points inner: the inner loop has no carried dependency and
    # vectorizes, and real arithmetic avoids the NaN-aware complex product helper
    for k in range(1, order):
        cr = zeta[k].real
        ci = zeta[k].imag
        rk = rt[k]
        ik = 1.0 / rk
        for i in range(n):
            pr = cr * tr[i] - ci * ti[i]
            pim = cr * ti[i] + ci * tr[i]
            dr[i] += rk * pr
            di[i] += rk * pim
            t = (tr[i] * zr[i] - ti[i] * zi[i]) * ik
            ti[i] = (tr[i] * zi[i] + ti[i] * zr[i]) * ik
            tr[i] = t
            vr[i] += cr * tr[i] - ci * ti[i]
            vi[i] += cr * ti[i] + ci * tr[i]
    out_v = np.asarray(vr) + 1j * np.asarray(vi)
    out_d = np.asarray(dr) + 1j * np.asarray(di)
    return out_v, out_d


cdef inline void _horner(const cplx[::1] c, Py_ssize_t deg, cplx w, cplx* p, cplx* dp) noexcept nogil:
    cdef Py_ssize_t k
    cdef cplx pv = c[deg]
    cdef cplx dv = 0.0
    for k in range(deg - 1, -1, -1):
        dv = dv * w + pv
        pv = pv * w + c[k]
    p[0] = pv
    dp[0] = dv


cdef inline cplx _newton_ratio(const cplx[::1] c, const cplx[::1] rev, Py_ssize_t deg, cplx w) noexcept nogil:
    """p(w)/p'(w), evaluated through the reversed polynomial outside the unit disk."""
    cdef cplx p, dp, u
    cdef double aw = w.real * w.real + w.imag * w.imag
    if aw <= 1.0:
        _horner(c, deg, w, &p, &dp)
        if dp == 0:
            return 0.0
        return p / dp
    u = 1.0 / w
    _horner(rev, deg, u, &p, &dp)
    # p(w) = w^deg q(u)  =>  p/p' = 1 / (u (deg - u q'(u)/q(u)))
    if p == 0:
        return 0.0
    return 1.0 / (u * (deg - u * dp / p))


def aberth(const cplx[::1] coeffs, cplx[::1] roots, int maxiter=200, double tol=1e-14):
    """Aberth-Ehrlich simultaneous iteration on ascending coefficients.

    ``roots`` holds the initial guesses and is updated in place. Returns the
    number of sweeps performed and a boolean array of converged roots.
    """
    cdef Py_ssize_t deg = coeffs.shape[0] - 1
    cdef Py_ssize_t i, j, it
    cdef cplx ratio, s, diff, corr
    cdef double step, scale, sr, si, xr, xi, dr, di, d2, inv
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] done = np.zeros(deg, dtype=np.uint8)
    cdef Py_ssize_t remaining = deg
    rev_arr = np.ascontiguousarray(np.asarray(coeffs)[::-1])
    cdef const cplx[::1] rev = rev_arr
    it = 0
    while it < maxiter and remaining > 0:
        it += 1
        for i in range(deg):
            if done[i]:
                continue
            ratio = _newton_ratio(coeffs, rev, deg, roots[i])
            sr = 0.0
            si = 0.0
            xr = roots[i].real
            xi = roots[i].imag
            for j in range(deg):
                if j != i:
                    dr = xr - roots[j].real
                    di = xi - roots[j].imag
                    d2 = dr * dr + di * di
                    if d2 > 0:
                        inv = 1.0 / d2
                        sr = sr + dr * inv
                        si = si - di * inv
            s = sr + 1j * si
            corr = ratio / (1.0 - ratio * s)
            roots[i] = roots[i] - corr
            step = sqrt(corr.real * corr.real + corr.imag * corr.imag)
            scale = sqrt(roots[i].real * roots[i].real + roots[i].imag * roots[i].imag)
            if step <= tol * (1.0 + scale):
                done[i] = 1
                remaining -= 1
    return it, done.astype(bool)
