# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: basis-row evaluation and the per-candidate
observation log-likelihood scan. Mirrors ipromp._kernels.pure; the pure
module is the reference, this one is the fast path."""

from libc.math cimport exp, log, M_PI

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def rbf_rows(z, centers, double width, bint normalize):
    """Gaussian basis rows for each phase value; optionally row-normalized."""
    z_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(z, dtype=np.float64)))
    c_arr = np.ascontiguousarray(np.asarray(centers, dtype=np.float64))
    cdef double[::1] zv = z_arr
    cdef double[::1] cv = c_arr
    cdef Py_ssize_t s = zv.shape[0], n = cv.shape[0]
    out = np.empty((s, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    _rbf_fill(zv, cv, width, normalize, ov)
    return out


cdef void _rbf_fill(double[::1] z, double[::1] centers, double width,
                    bint normalize, double[:, ::1] out) noexcept:
    cdef Py_ssize_t s = z.shape[0], n = centers.shape[0]
    cdef Py_ssize_t j, k
    cdef double d, tot, inv2 = 1.0 / (2.0 * width * width)
    for j in range(s):
        tot = 0.0
        for k in range(n):
            d = z[j] - centers[k]
            out[j, k] = exp(-d * d * inv2)
            tot += out[j, k]
        if normalize:
            for k in range(n):
                out[j, k] /= tot


def window_loglik_scan(times, values, centers, double width, bint normalize,
                       mu_h, sig_hh, noise, alphas, double t_ref):
    """Log density of stacked human samples for each candidate scaling.

    Same contract as the pure kernel: times (s,), values (s, P), weight
    mean (P, N), weight covariance (P, N, P, N), per-DoF noise (P,),
    candidates (C,). Returns (C,) log densities; raises
    ``np.linalg.LinAlgError`` when a candidate's marginal covariance is not
    positive definite.
    """
    t_arr = np.ascontiguousarray(np.asarray(times, dtype=np.float64))
    y_arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    c_arr = np.ascontiguousarray(np.asarray(centers, dtype=np.float64))
    mu_arr = np.ascontiguousarray(np.asarray(mu_h, dtype=np.float64))
    sig_arr = np.ascontiguousarray(np.asarray(sig_hh, dtype=np.float64))
    noise_arr = np.ascontiguousarray(np.asarray(noise, dtype=np.float64))
    a_arr = np.ascontiguousarray(np.asarray(alphas, dtype=np.float64))

    cdef double[::1] tv = t_arr
    cdef double[:, ::1] yv = y_arr
    cdef double[::1] cv = c_arr
    cdef double[:, ::1] muv = mu_arr
    cdef double[:, :, :, ::1] sigv = sig_arr
    cdef double[::1] nv = noise_arr
    cdef double[::1] av = a_arr

    cdef Py_ssize_t s = tv.shape[0], p = yv.shape[1], n = cv.shape[0]
    cdef Py_ssize_t nc = av.shape[0], dim = s * p
    if yv.shape[0] != s:
        raise ValueError("times and values disagree on the sample count")
    if muv.shape[0] != p or muv.shape[1] != n:
        raise ValueError("weight mean block has the wrong shape")
    if (sigv.shape[0] != p or sigv.shape[1] != n or sigv.shape[2] != p
            or sigv.shape[3] != n):
        raise ValueError("weight covariance block has the wrong shape")
    if nv.shape[0] != p:
        raise ValueError("need one noise entry per human DoF")
    if s == 0:
        raise ValueError("empty observation batch")

    out = np.empty(nc, dtype=np.float64)
    cdef double[::1] ov = out
    z_buf = np.empty(s, dtype=np.float64)
    phi_buf = np.empty((s, n), dtype=np.float64)
    half_buf = np.empty((s, p, p, n), dtype=np.float64)
    cov_buf = np.empty((dim, dim), dtype=np.float64)
    resid_buf = np.empty(dim, dtype=np.float64)
    cdef double[::1] zv = z_buf
    cdef double[: , ::1] phiv = phi_buf
    cdef double[:, :, :, ::1] hv = half_buf
    cdef double[:, ::1] covv = cov_buf
    cdef double[::1] rv = resid_buf

    cdef Py_ssize_t ci, j, k, a, b, m, q, col
    cdef double denom, acc, ll
    cdef int fail
    for ci in range(nc):
        denom = av[ci] * t_ref
        for j in range(s):
            zv[j] = tv[j] / denom
            if zv[j] < 0.0:
                zv[j] = 0.0
            elif zv[j] > 1.0:
                zv[j] = 1.0
        _rbf_fill(zv, cv, width, normalize, phiv)
        # half[j, a, b, m] = sum_n phi[j, n] * sig[a, n, b, m]
        for j in range(s):
            for a in range(p):
                for b in range(p):
                    for m in range(n):
                        acc = 0.0
                        for q in range(n):
                            acc += phiv[j, q] * sigv[a, q, b, m]
                        hv[j, a, b, m] = acc
        # cov[(j p + a), (k p + b)] = sum_m half[j, a, b, m] * phi[k, m]
        for j in range(s):
            for a in range(p):
                for k in range(s):
                    for b in range(p):
                        acc = 0.0
                        for m in range(n):
                            acc += hv[j, a, b, m] * phiv[k, m]
                        covv[j * p + a, k * p + b] = acc
        for j in range(s):
            for a in range(p):
                covv[j * p + a, j * p + a] += nv[a]
        # resid = y - Psi mu, sample-major
        for j in range(s):
            for a in range(p):
                acc = 0.0
                for m in range(n):
                    acc += phiv[j, m] * muv[a, m]
                rv[j * p + a] = yv[j, a] - acc
        ll = _chol_loglik(covv, rv, dim, &fail)
        if fail:
            raise np.linalg.LinAlgError(
                "observation covariance not positive definite "
                f"(candidate {av[ci]:.4f})")
        ov[ci] = ll
    return out


cdef double _chol_loglik(double[:, ::1] cov, double[::1] resid,
                         Py_ssize_t dim, int *fail) noexcept:
    """In-place lower Cholesky, then -0.5 (r^T S^-1 r + log|S| + d log 2 pi).

    Overwrites the lower triangle of cov with L and resid with the forward
    substitution L^-1 r.
    """
    cdef Py_ssize_t i, j, k
    cdef double acc, logdet = 0.0, quad = 0.0
    fail[0] = 0
    for i in range(dim):
        for j in range(i + 1):
            acc = cov[i, j]
            for k in range(j):
                acc -= cov[i, k] * cov[j, k]
            if i == j:
                if acc <= 0.0:
                    fail[0] = 1
                    return 0.0
                cov[i, i] = acc ** 0.5
                logdet += log(cov[i, i])
            else:
                cov[i, j] = acc / cov[j, j]
    for i in range(dim):
        acc = resid[i]
        for k in range(i):
            acc -= cov[i, k] * resid[k]
        resid[i] = acc / cov[i, i]
        quad += resid[i] * resid[i]
    return -0.5 * (quad + 2.0 * logdet + dim * log(2.0 * M_PI))
