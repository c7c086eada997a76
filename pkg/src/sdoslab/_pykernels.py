"""Pure-numpy versions of the stencil and Chebyshev kernels.

Same contract as the compiled module: blocks of shape ``(n, m)``, neighbour
table ``nbr`` of shape ``(n, 2d)`` with sentinel ``n`` for absent neighbours.
"""

import numpy as np


def _apply(nbr, diag, hop, x):
    padded = np.concatenate([x, np.zeros((1, x.shape[1]))], axis=0)
    acc = padded[nbr[:, 0]]
    for j in range(1, nbr.shape[1]):
        acc = acc + padded[nbr[:, j]]
    return diag[:, None] * x + hop * acc


def _dots(a, b):
    return (a * b).sum(axis=0)


def matvec(nbr, diag, hop, x):
    return _apply(nbr, diag, hop, np.asarray(x, dtype=np.float64))


def cheb_moments(nbr, diag, hop, x0, n_moments):
    x0 = np.array(x0, dtype=np.float64)
    mu = np.zeros((n_moments, x0.shape[1]))
    if n_moments == 0:
        return mu
    a_prev = x0
    mu[0] = _dots(a_prev, a_prev)
    if n_moments == 1:
        return mu
    a_cur = _apply(nbr, diag, hop, a_prev)
    mu[1] = _dots(a_cur, a_prev)
    for k in range(1, (n_moments + 1) // 2):
        a_next = 2.0 * _apply(nbr, diag, hop, a_cur) - a_prev
        if 2 * k < n_moments:
            mu[2 * k] = 2.0 * _dots(a_cur, a_cur) - mu[0]
        if 2 * k + 1 < n_moments:
            mu[2 * k + 1] = 2.0 * _dots(a_next, a_cur) - mu[1]
        a_prev, a_cur = a_cur, a_next
    return mu


def cheb_series(nbr, diag, hop, x0, coeffs):
    x0 = np.array(x0, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size == 0:
        return np.zeros_like(x0)
    acc = coeffs[0] * x0
    if coeffs.size == 1:
        return acc
    a_prev = x0
    a_cur = _apply(nbr, diag, hop, a_prev)
    acc = acc + coeffs[1] * a_cur
    for ck in coeffs[2:]:
        a_next = 2.0 * _apply(nbr, diag, hop, a_cur) - a_prev
        acc = acc + ck * a_next
        a_prev, a_cur = a_cur, a_next
    return acc
