# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: Bose mode sums and displacement-weighted products.

The mode sums take ``q_k = exp(-beta |k|^2)``, ``a_k = 1 - q_k`` (computed
with ``expm1``) and ``e = expm1(beta s)`` so that
``1 / (exp(beta (|k|^2 + s)) - 1) = q_k / (e + a_k)`` costs one division per
mode and never subtracts nearby numbers.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def bose_sum(const double[::1] q, const double[::1] a, double e):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0
    with nogil:
        for i in range(n):
            acc += q[i] / (e + a[i])
    return acc


def bose_sum_derivative(const double[::1] q, const double[::1] a, double e):
    """Derivative of :func:`bose_sum` in ``beta mu``: ``(1 + e) sum q / (e + a)^2``."""
    cdef Py_ssize_t i, n = a.shape[0]
    cdef double acc = 0.0, den
    with nogil:
        for i in range(n):
            den = e + a[i]
            acc += q[i] / (den * den)
    return (1.0 + e) * acc


def hadamard_displacement(const double complex[::1] vdisp,
                          const double complex[:, ::1] alpha,
                          const Py_ssize_t[:, ::1] disp_index):
    cdef Py_ssize_t i, j, n = alpha.shape[0], m = alpha.shape[1]
    cdef double vr, vi, ar, ai
    cdef double complex v, w
    out = np.empty((n, m), dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64)
    with nogil:
        for i in range(n):
            for j in range(m):
                # written out: the generic complex product carries Annex G NaN handling
                v = vdisp[disp_index[i, j]]
                w = alpha[i, j]
                vr = v.real
                vi = v.imag
                ar = w.real
                ai = w.imag
                o[i, 2 * j] = vr * ar - vi * ai
                o[i, 2 * j + 1] = vr * ai + vi * ar
    return out
