# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pyref likelihood kernels.

Same contracts and same evaluation order as designrl.kernels.pyref; the
only intended difference is speed.  log_ndtr uses erfc in the bulk and the
Mills-ratio asymptotic series in the deep lower tail where erfc underflows.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, log, log1p, sqrt

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453
cdef double SQRT1_2 = 0.7071067811865476

BACKEND_NAME = "native"


cdef inline double _log_ndtr(double z) nogil:
    cdef double t, inv2
    if z > -35.0:
        t = 0.5 * erfc(-z * SQRT1_2)
        if t >= 1.0:
            return log1p(-0.5 * erfc(z * SQRT1_2))
        return log(t)
    # Mills-ratio series: Phi(z) = phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - ...)
    inv2 = 1.0 / (z * z)
    t = inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)))
    return -0.5 * z * z - 0.5 * LOG_2PI - log(-z) + log1p(t)


def log_ndtr_batch(cnp.ndarray[cnp.float64_t, ndim=1] z):
    """Elementwise log Phi(z); exposed for parity tests."""
    cdef Py_ssize_t n = z.shape[0], i
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        out[i] = _log_ndtr(z[i])
    return out


def loc_loglik_batch(double y,
                     cnp.ndarray[cnp.float64_t, ndim=3] thetas,
                     cnp.ndarray[cnp.float64_t, ndim=1] xi,
                     double alpha, double b, double m, double sigma):
    cdef Py_ssize_t n = thetas.shape[0], K = thetas.shape[1], d = thetas.shape[2]
    cdef Py_ssize_t i, k, j
    cdef double sq, diff, total, z
    cdef double log_sigma = log(sigma)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        total = b
        for k in range(K):
            sq = 0.0
            for j in range(d):
                diff = thetas[i, k, j] - xi[j]
                sq += diff * diff
            total += alpha / (m + sq)
        z = (y - log(total)) / sigma
        out[i] = -0.5 * z * z - log_sigma - 0.5 * LOG_2PI
    return out


cdef inline double _ces_u(double rho, double a0, double a1, double a2,
                          double lx0, double lx1, double lx2) nogil:
    # x^rho as exp(rho log x) on precomputed logs; log(0) = -inf gives the
    # zero-bundle limit for free.  About twice as fast as scalar pow.
    cdef double inner = a0 * exp(rho * lx0) + a1 * exp(rho * lx1) \
        + a2 * exp(rho * lx2)
    if inner <= 0.0:
        return 0.0
    return exp(log(inner) / rho)


def ces_loglik_batch(double y,
                     cnp.ndarray[cnp.float64_t, ndim=1] rho,
                     cnp.ndarray[cnp.float64_t, ndim=2] alphas,
                     cnp.ndarray[cnp.float64_t, ndim=1] u,
                     cnp.ndarray[cnp.float64_t, ndim=1] xi,
                     double nu, double eps):
    cdef Py_ssize_t n = rho.shape[0], i
    cdef double lo = log(eps) - log1p(-eps)
    cdef double hi = -lo
    cdef double dx0 = xi[0] - xi[3], dx1 = xi[1] - xi[4], dx2 = xi[2] - xi[5]
    cdef double dist = sqrt(dx0 * dx0 + dx1 * dx1 + dx2 * dx2)
    cdef double la0 = log(xi[0]), la1 = log(xi[1]), la2 = log(xi[2])
    cdef double lb0 = log(xi[3]), lb1 = log(xi[4]), lb2 = log(xi[5])
    cdef double eta = 0.0, log_jac = 0.0
    cdef int interior = 0
    if eps < y < 1.0 - eps:
        interior = 1
        eta = log(y) - log1p(-y)
        log_jac = -log(y) - log1p(-y)
    cdef double ua, ub, mu, s, z
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    for i in range(n):
        ua = _ces_u(rho[i], alphas[i, 0], alphas[i, 1], alphas[i, 2],
                    la0, la1, la2)
        ub = _ces_u(rho[i], alphas[i, 0], alphas[i, 1], alphas[i, 2],
                    lb0, lb1, lb2)
        mu = u[i] * (ua - ub)
        s = nu * u[i] * (1.0 + dist)
        if interior:
            z = (eta - mu) / s
            out[i] = -0.5 * z * z - log(s) - 0.5 * LOG_2PI + log_jac
        elif y <= eps:
            out[i] = _log_ndtr((lo - mu) / s)
        else:
            out[i] = _log_ndtr((mu - hi) / s)
    return out
