# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of _kernels_np: same four functions, same semantics.

The row-wise bandwidth search and the pairwise gradient are the hot
loops of the projection; typed C loops avoid the temporaries the numpy
version allocates per row.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

NAME = "compiled"


def pairwise_sq_dists(double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    out = np.zeros((n, n))
    cdef double[:, ::1] D2 = out
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = X[i, k] - X[j, k]
                acc += diff * diff
            D2[i, j] = acc
            D2[j, i] = acc
    return out


def conditional_affinities(double[:, ::1] D2, double log_perp,
                           double tol=1e-5, int max_iter=50):
    cdef Py_ssize_t n = D2.shape[0]
    cdef Py_ssize_t i, j, it
    P_out = np.zeros((n, n))
    H_out = np.zeros(n)
    cdef double[:, ::1] P = P_out
    cdef double[::1] H = H_out
    cdef double beta, beta_min, beta_max, sum_p, dsum, h, diff, pj
    for i in range(n):
        beta = 1.0
        beta_min = -INFINITY
        beta_max = INFINITY
        h = 0.0
        for it in range(max_iter):
            sum_p = 0.0
            dsum = 0.0
            for j in range(n):
                if j == i:
                    P[i, j] = 0.0
                    continue
                pj = exp(-D2[i, j] * beta)
                P[i, j] = pj
                sum_p += pj
                dsum += D2[i, j] * pj
            if sum_p < 1e-300:
                sum_p = 1e-300
            h = log(sum_p) + beta * dsum / sum_p
            for j in range(n):
                P[i, j] /= sum_p
            diff = h - log_perp
            if diff < tol and diff > -tol:
                break
            if diff > 0:
                beta_min = beta
                if beta_max == INFINITY:
                    beta = beta * 2.0
                else:
                    beta = (beta + beta_max) / 2.0
            else:
                beta_max = beta
                if beta_min == -INFINITY:
                    beta = beta / 2.0
                else:
                    beta = (beta + beta_min) / 2.0
        H[i] = h
    return P_out, H_out


def gradient(double[:, ::1] P, double[:, ::1] Y):
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t i, j
    cdef double t, d0, d1, s, w
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d0 = Y[i, 0] - Y[j, 0]
            d1 = Y[i, 1] - Y[j, 1]
            t = 1.0 / (1.0 + d0 * d0 + d1 * d1)
            s += t
    grad_out = np.zeros((n, 2))
    cdef double[:, ::1] grad = grad_out
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d0 = Y[i, 0] - Y[j, 0]
            d1 = Y[i, 1] - Y[j, 1]
            t = 1.0 / (1.0 + d0 * d0 + d1 * d1)
            w = (P[i, j] - t / s) * t
            grad[i, 0] += 4.0 * w * d0
            grad[i, 1] += 4.0 * w * d1
    return grad_out


def kl_divergence(double[:, ::1] P, double[:, ::1] Y, double floor=1e-12):
    cdef Py_ssize_t n = Y.shape[0]
    cdef Py_ssize_t i, j
    cdef double t, d0, d1, s, q, kl
    s = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d0 = Y[i, 0] - Y[j, 0]
            d1 = Y[i, 1] - Y[j, 1]
            t = 1.0 / (1.0 + d0 * d0 + d1 * d1)
            s += t
    kl = 0.0
    for i in range(n):
        for j in range(n):
            if i == j or P[i, j] <= 0.0:
                continue
            d0 = Y[i, 0] - Y[j, 0]
            d1 = Y[i, 1] - Y[j, 1]
            t = 1.0 / (1.0 + d0 * d0 + d1 * d1)
            q = t / s
            if q < floor:
                q = floor
            kl += P[i, j] * (log(P[i, j]) - log(q))
    return kl
