# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil and Chebyshev kernels.

All routines act on a block of vectors ``x`` of shape ``(n, m)`` and on the
operator ``diag[i] x[i] + hop * sum_j x[nbr[i, j]]``; absent neighbours are
marked by the sentinel value ``n``.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef void _stencil(const long[:, ::1] nbr, const double[::1] diag, double hop,
                   const double[:, ::1] x, double[:, ::1] out,
                   double alpha, const double[:, ::1] prev, bint use_prev) noexcept nogil:
    # out = alpha * (A x) - prev   (prev ignored unless use_prev)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = x.shape[1]
    cdef Py_ssize_t nn = nbr.shape[1]
    cdef Py_ssize_t i, j, c
    cdef long nb
    cdef double acc
    for i in range(n):
        for c in range(m):
            acc = 0.0
            for j in range(nn):
                nb = nbr[i, j]
                if nb < n:
                    acc = acc + x[nb, c]
            acc = diag[i] * x[i, c] + hop * acc
            if use_prev:
                out[i, c] = alpha * acc - prev[i, c]
            else:
                out[i, c] = alpha * acc


cdef void _dots(const double[:, ::1] a, const double[:, ::1] b, double[::1] res) noexcept nogil:
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t i, c
    for c in range(m):
        res[c] = 0.0
    for i in range(n):
        for c in range(m):
            res[c] = res[c] + a[i, c] * b[i, c]


def matvec(const long[:, ::1] nbr, const double[::1] diag, double hop, const double[:, ::1] x):
    out = np.empty((x.shape[0], x.shape[1]), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        _stencil(nbr, diag, hop, x, o, 1.0, x, False)
    return out


def cheb_moments(const long[:, ::1] nbr, const double[::1] diag, double hop,
                 const double[:, ::1] x0, Py_ssize_t n_moments):
    """Moments <x0, T_k x0> per column, k < n_moments, by the doubling identities."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t m = x0.shape[1]
    mu_arr = np.zeros((n_moments, m), dtype=np.float64)
    cdef double[:, ::1] mu = mu_arr
    if n_moments == 0:
        return mu_arr
    a_prev_arr = np.array(x0, dtype=np.float64, copy=True)
    a_cur_arr = np.empty((n, m), dtype=np.float64)
    a_next_arr = np.empty((n, m), dtype=np.float64)
    tmp_arr = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] a_prev = a_prev_arr
    cdef double[:, ::1] a_cur = a_cur_arr
    cdef double[:, ::1] a_next = a_next_arr
    cdef double[:, ::1] swap
    cdef double[::1] tmp = tmp_arr
    cdef Py_ssize_t k, c, half
    with nogil:
        _dots(a_prev, a_prev, tmp)
        for c in range(m):
            mu[0, c] = tmp[c]
        if n_moments > 1:
            _stencil(nbr, diag, hop, a_prev, a_cur, 1.0, a_prev, False)
            _dots(a_cur, a_prev, tmp)
            for c in range(m):
                mu[1, c] = tmp[c]
        half = (n_moments + 1) // 2
        # invariant: a_prev = alpha_{k-1}, a_cur = alpha_k
        for k in range(1, half):
            _stencil(nbr, diag, hop, a_cur, a_next, 2.0, a_prev, True)
            if 2 * k < n_moments:
                _dots(a_cur, a_cur, tmp)
                for c in range(m):
                    mu[2 * k, c] = 2.0 * tmp[c] - mu[0, c]
            if 2 * k + 1 < n_moments:
                _dots(a_next, a_cur, tmp)
                for c in range(m):
                    mu[2 * k + 1, c] = 2.0 * tmp[c] - mu[1, c]
            swap = a_prev
            a_prev = a_cur
            a_cur = a_next
            a_next = swap
    return mu_arr


def cheb_series(const long[:, ::1] nbr, const double[::1] diag, double hop,
                const double[:, ::1] x0, const double[::1] coeffs):
    """Sum_k coeffs[k] T_k x0 for each column of x0."""
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t m = x0.shape[1]
    cdef Py_ssize_t nk = coeffs.shape[0]
    acc_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    if nk == 0:
        return acc_arr
    a_prev_arr = np.array(x0, dtype=np.float64, copy=True)
    a_cur_arr = np.empty((n, m), dtype=np.float64)
    a_next_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] a_prev = a_prev_arr
    cdef double[:, ::1] a_cur = a_cur_arr
    cdef double[:, ::1] a_next = a_next_arr
    cdef double[:, ::1] swap
    cdef Py_ssize_t i, c, k
    cdef double ck
    with nogil:
        ck = coeffs[0]
        for i in range(n):
            for c in range(m):
                acc[i, c] = ck * a_prev[i, c]
        if nk > 1:
            _stencil(nbr, diag, hop, a_prev, a_cur, 1.0, a_prev, False)
            ck = coeffs[1]
            for i in range(n):
                for c in range(m):
                    acc[i, c] = acc[i, c] + ck * a_cur[i, c]
        for k in range(2, nk):
            _stencil(nbr, diag, hop, a_cur, a_next, 2.0, a_prev, True)
            ck = coeffs[k]
            for i in range(n):
                for c in range(m):
                    acc[i, c] = acc[i, c] + ck * a_next[i, c]
            swap = a_prev
            a_prev = a_cur
            a_cur = a_next
            a_next = swap
    return acc_arr
