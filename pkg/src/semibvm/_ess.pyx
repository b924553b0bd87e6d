# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled elliptical slice kernel; same contract as ``_ess_py``."""
import numpy as np
from libc.math cimport cos, sin, exp, log, log1p, M_PI

cdef double LOG_CLIP_LO = log(1e-12)
cdef double LOG_CLIP_HI = log1p(-1e-12)

BINOMIAL = 0
DENSITY = 1


cdef inline double _softplus(double x) nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _clip(double x) nogil:
    if x < LOG_CLIP_LO:
        return LOG_CLIP_LO
    if x > LOG_CLIP_HI:
        return LOG_CLIP_HI
    return x


cdef double _loglik(double[::1] eta, int kind, double[::1] c1, double[::1] c2, double total) nogil:
    cdef Py_ssize_t j, m = eta.shape[0]
    cdef double acc = 0.0, top, x, norm = 0.0
    if kind == 0:
        for j in range(m):
            if c1[j] != 0.0:
                acc += c1[j] * _clip(-_softplus(-eta[j]))
            if c2[j] != 0.0:
                acc += c2[j] * _clip(-_softplus(eta[j]))
        return acc
    top = eta[0] + c2[0]
    for j in range(1, m):
        x = eta[j] + c2[j]
        if x > top:
            top = x
    for j in range(m):
        acc += c1[j] * eta[j]
        norm += exp(eta[j] + c2[j] - top)
    return acc - total * (top + log(norm))


def loglik(eta, int kind, c1, c2, double total):
    cdef double[::1] e = eta.astype(float, order="C", copy=False)
    return _loglik(e, kind, c1, c2, total)


def ess_block(double[::1] theta, double[::1] eta, double ll,
              double[:, ::1] nus, double[:, ::1] eta_nus,
              double[::1] logu, double[::1] phi0,
              double[::1] pool, Py_ssize_t pool_pos,
              int kind, double[::1] c1, double[::1] c2, double total,
              double[:, ::1] theta_out, double[::1] ll_out, long[::1] evals_out):
    cdef Py_ssize_t n_steps = logu.shape[0], n_pool = pool.shape[0]
    cdef Py_ssize_t p = theta.shape[0], m = eta.shape[0]
    cdef Py_ssize_t i, j
    cdef double threshold, phi, lo, hi, c = 1.0, s = 0.0, ll_prop
    cdef long evals
    cdef bint interrupted = False
    cdef Py_ssize_t done = n_steps
    cdef double[::1] prop = np.empty(m)
    with nogil:
        for i in range(n_steps):
            threshold = ll + logu[i]
            phi = phi0[i]
            lo = phi - 2.0 * M_PI
            hi = phi
            evals = 0
            while True:
                c = cos(phi)
                s = sin(phi)
                for j in range(m):
                    prop[j] = c * eta[j] + s * eta_nus[i, j]
                ll_prop = _loglik(prop, kind, c1, c2, total)
                evals += 1
                if ll_prop > threshold:
                    break
                if phi < 0.0:
                    lo = phi
                else:
                    hi = phi
                if pool_pos >= n_pool:
                    interrupted = True
                    break
                phi = lo + (hi - lo) * pool[pool_pos]
                pool_pos += 1
            if interrupted:
                done = i
                break
            for j in range(p):
                theta[j] = c * theta[j] + s * nus[i, j]
                theta_out[i, j] = theta[j]
            for j in range(m):
                eta[j] = prop[j]
            ll = ll_prop
            ll_out[i] = ll
            evals_out[i] = evals
    return done, pool_pos, ll
