"""Pure-numpy kernels for the 2-D embedding projection.

These are the reference semantics; the compiled module implements the
same four functions with identical signatures. Everything here is
O(n^2) in the number of points — exact, no tree approximation.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Squared euclidean distances, zero diagonal, clipped at 0."""
    sq = np.einsum("ij,ij->i", X, X)
    D2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(D2, 0.0)
    return np.maximum(D2, 0.0)


def conditional_affinities(D2: np.ndarray, log_perp: float,
                           tol: float = 1e-5, max_iter: int = 50):
    """Row-stochastic Gaussian affinities with per-row bandwidth.

    For each point the precision beta = 1/(2 sigma^2) is binary-searched
    until the row's Shannon entropy matches log(perplexity) within tol.
    Returns (P, H) where H holds the achieved per-row entropies (nats).
    """
    n = D2.shape[0]
    P = np.zeros((n, n))
    H_out = np.zeros(n)
    for i in range(n):
        d = np.delete(D2[i], i)
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        h = 0.0
        p = np.zeros_like(d)
        for _ in range(max_iter):
            p = np.exp(-d * beta)
            sum_p = max(p.sum(), 1e-300)
            # H = log(sum_p) + beta * <d>_p, the entropy of p / sum_p
            h = np.log(sum_p) + beta * float((d * p).sum()) / sum_p
            p /= sum_p
            diff = h - log_perp
            if abs(diff) <= tol:
                break
            if diff > 0:  # entropy too high -> narrow the kernel
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        H_out[i] = h
        P[i, :i] = p[:i]
        P[i, i + 1:] = p[i:]
    return P, H_out


def _student_t(Y: np.ndarray) -> np.ndarray:
    D2 = pairwise_sq_dists(Y)
    T = 1.0 / (1.0 + D2)
    np.fill_diagonal(T, 0.0)
    return T


def gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """dKL/dY for the Student-t output distribution."""
    T = _student_t(Y)
    Q = T / T.sum()
    W = (P - Q) * T
    # grad_i = 4 * sum_j W_ij (y_i - y_j)
    return 4.0 * (np.diag(W.sum(axis=1)) @ Y - W @ Y)


def kl_divergence(P: np.ndarray, Y: np.ndarray, floor: float = 1e-12) -> float:
    T = _student_t(Y)
    Q = np.maximum(T / T.sum(), floor)
    mask = P > 0.0
    return float((P[mask] * (np.log(P[mask]) - np.log(Q[mask]))).sum())
