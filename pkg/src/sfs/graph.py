"""Locally scaled Gaussian similarity graphs and their Laplacians."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityGraph:
    W: np.ndarray
    d: np.ndarray
    sigma: np.ndarray
    k_local: int = 7


def _as_weights(S, m: int) -> np.ndarray:
    if S is None:
        return np.ones(m)
    S = np.asarray(S, dtype=float)
    if S.ndim == 2:
        S = np.diag(S)
    if S.shape != (m,):
        raise GraphError(f"scaling has {S.shape[0]} entries, expected {m}")
    return S


def sq_distances(X: np.ndarray, S=None) -> np.ndarray:
    """Pairwise ``(x_i - x_j)^T S (x_i - x_j)`` for diagonal ``S``.

    Computed by explicit differences, so exact duplicates give exactly 0.
    """
    X = np.asarray(X, dtype=float)
    s = _as_weights(S, X.shape[1])
    out = np.empty((X.shape[0], X.shape[0]))
    for i, x in enumerate(X):
        diff = X - x
        out[i] = (diff * diff) @ s
    return out


def neighbor_order(dist: np.ndarray) -> np.ndarray:
    """Row-wise neighbor ranking excluding self; ties go to the lower index."""
    n = dist.shape[0]
    masked = dist.copy()
    masked[np.arange(n), np.arange(n)] = np.inf
    return np.argsort(masked, axis=1, kind="stable")[:, : n - 1]


def local_scales(X, k: int = 7, S=None) -> np.ndarray:
    """Distance from each sample to its ``k``-th nearest neighbor.

    Neighbors are ranked by plain Euclidean distance. Without ``S`` the
    result is the Euclidean distance to that neighbor; with ``S`` it is the
    quadratic form ``(x_i - x_i^(k))^T S (x_i - x_i^(k))``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    d2 = sq_distances(X)
    kth = neighbor_order(d2)[:, k - 1]
    rows = np.arange(n)
    if S is None:
        sigma = np.sqrt(d2[rows, kth])
    else:
        diff = X - X[kth]
        sigma = (diff * diff) @ _as_weights(S, X.shape[1])
    zero = np.flatnonzero(sigma <= 0)
    if zero.size:
        i = zero[0]
        raise GraphError(f"zero local scale: rows {i} and {kth[i]} coincide")
    return sigma


def knn_mask(dist: np.ndarray, k: int) -> np.ndarray:
    """Symmetric mask keeping (i, j) when either is among the other's k nearest."""
    n = dist.shape[0]
    k = min(k, n - 1)
    nbrs = neighbor_order(dist)[:, :k]
    mask = np.zeros((n, n), dtype=bool)
    mask[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    return mask | mask.T


def similarity_matrix(X, S=None, sigma=None, sparsify_k: Optional[int] = None,
                      k_local: int = 7) -> SimilarityGraph:
    """Gaussian weights ``exp(-(x_i-x_j)^T S (x_i-x_j) / (sigma_i sigma_j))``.

    ``sigma`` defaults to the Euclidean local scales of ``X``. With
    ``sparsify_k`` only edges between mutual-or-one-way ``sparsify_k``
    nearest neighbors (under the scaled metric) survive.
    """
    X = np.asarray(X, dtype=float)
    if sigma is None:
        sigma = local_scales(X, k_local)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(~(sigma > 0)):
        raise GraphError("all local scales must be positive")
    s = _as_weights(S, X.shape[1])
    if np.any(s < 0):
        raise GraphError("scaling entries must be non-negative")
    d2 = sq_distances(X, s)
    W = np.exp(-d2 / np.outer(sigma, sigma))
    np.fill_diagonal(W, 0.0)
    if sparsify_k is not None:
        W = np.where(knn_mask(d2, sparsify_k), W, 0.0)
    return SimilarityGraph(W, W.sum(axis=1), sigma, k_local)


def laplacian(g: SimilarityGraph) -> tuple[np.ndarray, np.ndarray]:
    """``(L, D)`` with ``L = D - W`` and ``D = diag(d)``."""
    D = np.diag(g.d)
    return D - g.W, D
