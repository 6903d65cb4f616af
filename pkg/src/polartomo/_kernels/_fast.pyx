# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pure``. Same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, lgamma, exp

cnp.import_array()


cdef inline double _sqrt_factorial(long n) nogil:
    return exp(0.5 * lgamma(n + 1.0))


def event_amplitudes(isometry, events):
    cdef const double complex[:, :] iso = np.ascontiguousarray(isometry, dtype=np.complex128)
    cdef const long long[:, :] ev = np.ascontiguousarray(events, dtype=np.int64)
    cdef Py_ssize_t n_events = ev.shape[0], n_det = ev.shape[1]
    cdef long N = 0
    cdef Py_ssize_t i, k, m, row
    if n_events:
        for i in range(n_det):
            N += ev[0, i]
    out_arr = np.zeros((n_events, N + 1), dtype=np.complex128)
    cdef double complex[:, :] out = out_arr
    cdef double complex[:] poly = np.zeros(N + 1, dtype=np.complex128)
    cdef double[:] fock = np.empty(N + 1)
    cdef double complex h, v
    cdef double norm
    cdef long deg
    for m in range(N + 1):
        fock[m] = _sqrt_factorial(N - m) * _sqrt_factorial(m)
    with nogil:
        for row in range(n_events):
            for m in range(N + 1):
                poly[m] = 0
            poly[0] = 1
            deg = 0
            norm = 1.0
            for i in range(n_det):
                h = iso[i, 0]
                v = iso[i, 1]
                for k in range(ev[row, i]):
                    m = deg + 1
                    while m > 0:
                        poly[m] = poly[m] * h + poly[m - 1] * v
                        m -= 1
                    poly[0] = poly[0] * h
                    deg += 1
                norm *= _sqrt_factorial(ev[row, i])
            for m in range(N + 1):
                out[row, m] = poly[m] * fock[m] / norm
    return out_arr


def residuals_jacobian(x, amps, weights, counts, double floor):
    cdef const double[:] xp = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double complex[:, :] a = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef const double[:] wt = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[:] n = np.ascontiguousarray(counts, dtype=np.float64)
    cdef Py_ssize_t M = a.shape[0], d = a.shape[1]
    cdef Py_ssize_t mu, i, j, p
    r_arr = np.empty(M)
    J_arr = np.empty((M, d * d))
    cdef double[:] r = r_arr
    cdef double[:, :] J = J_arr
    cdef double complex[:, :] T = np.zeros((d, d), dtype=np.complex128)
    cdef double complex[:] w = np.empty(d, dtype=np.complex128)
    cdef double complex acc, z
    cdef double q, nbar, denom, drdn, scale

    for i in range(d):
        T[i, i] = xp[i]
    p = d
    for i in range(d):
        for j in range(i):
            T[i, j] = xp[p] + 1j * xp[p + 1]
            p += 2

    with nogil:
        for mu in range(M):
            q = 0.0
            for i in range(d):
                acc = 0
                for j in range(i + 1):
                    acc = acc + T[i, j] * a[mu, j]
                w[i] = acc
                q += acc.real * acc.real + acc.imag * acc.imag
            nbar = wt[mu] * q
            if nbar >= floor:
                denom = sqrt(nbar)
                r[mu] = (nbar - n[mu]) / denom
                drdn = (nbar + n[mu]) / (2.0 * nbar * denom)
            else:
                denom = sqrt(floor)
                r[mu] = (nbar - n[mu]) / denom
                drdn = 1.0 / denom
            scale = 2.0 * drdn * wt[mu]
            for i in range(d):
                z = w[i].conjugate() * a[mu, i]
                J[mu, i] = scale * z.real
            p = d
            for i in range(d):
                for j in range(i):
                    z = w[i].conjugate() * a[mu, j]
                    J[mu, p] = scale * z.real
                    J[mu, p + 1] = -scale * z.imag
                    p += 2
    return r_arr, J_arr
