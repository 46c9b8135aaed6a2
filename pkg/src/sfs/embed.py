"""Transductive spectral embedding of scaled train + test samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .graph import GraphError, laplacian, local_scales, neighbor_order, similarity_matrix, sq_distances


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class Embedding:
    """Coordinates ``U`` ((N+n) x ell), training rows first.

    ``L`` and ``D`` are the Laplacian and degree matrix the coordinates
    solve ``L u = lambda D u`` for.
    """

    U: np.ndarray
    eigenvalues: np.ndarray
    n_train: int
    L: np.ndarray
    D: np.ndarray

    @property
    def ell(self) -> int:
        return self.U.shape[1]

    @property
    def train(self) -> np.ndarray:
        return self.U[: self.n_train]

    @property
    def test(self) -> np.ndarray:
        return self.U[self.n_train :]

    def truncate(self, ell: int) -> "Embedding":
        if not 1 <= ell <= self.ell:
            raise EmbeddingError(f"ell={ell} outside 1..{self.ell}")
        return Embedding(self.U[:, :ell], self.eigenvalues[:ell], self.n_train, self.L, self.D)


def apply_scaling(X, Y, s_half) -> np.ndarray:
    """``[X; Y] diag(s_half)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float)) if np.size(Y) else np.empty((0, X.shape[1]))
    s_half = np.asarray(s_half, dtype=float)
    if Y.shape[1] != X.shape[1] or s_half.shape != (X.shape[1],):
        raise EmbeddingError(
            f"dimension mismatch: X has {X.shape[1]} columns, Y {Y.shape[1]}, s_half {s_half.size}")
    return np.vstack([X, Y]) * s_half


def _safe_scales(Z: np.ndarray, k: int) -> np.ndarray:
    try:
        return local_scales(Z, k)
    except GraphError:
        pass
    # zeroed features can make rows coincide; floor at the smallest
    # positive scale, or the smallest positive distance if none is
    d2 = sq_distances(Z)
    kth = neighbor_order(d2)[:, k - 1]
    sigma = np.sqrt(d2[np.arange(Z.shape[0]), kth])
    pos = sigma[sigma > 0]
    if pos.size == 0:
        pos = np.sqrt(d2[d2 > 0])
    if pos.size == 0:
        raise EmbeddingError("all samples coincide after scaling")
    return np.maximum(sigma, pos.min())


def _sign_fix(U: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def spectral_embed(Z, ell: int, k_local: int = 7, sparsify_k: int | None = 7,
                   n_train: int = 0, zero_tol: float = 1e-10) -> Embedding:
    """Eigenvectors of ``L u = lambda D u`` for the ``ell`` smallest nonzero eigenvalues.

    ``ell`` may be ``None`` to keep every nonzero eigenpair, which lets a
    caller truncate to several dimensions without re-solving.
    """
    Z = np.asarray(Z, dtype=float)
    N = Z.shape[0]
    if ell is not None and (ell < 1 or N <= ell + 1):
        raise EmbeddingError(f"need 1 <= ell and ell + 1 < samples, got ell={ell}, samples={N}")
    sigma = _safe_scales(Z, k_local)
    g = similarity_matrix(Z, None, sigma, sparsify_k=sparsify_k, k_local=k_local)
    if np.any(g.d <= 0):
        raise EmbeddingError("isolated vertex in similarity graph")
    L, D = laplacian(g)
    vals, vecs = la.eigh(L, D)
    nonzero = vals > zero_tol * vals[-1]
    n_zero = int(np.sum(~nonzero))
    if ell is not None and n_zero > ell + 1:
        raise EmbeddingError(f"graph has {n_zero} connected components, more than ell + 1 = {ell + 1}")
    vals, vecs = vals[nonzero], vecs[:, nonzero]
    if ell is not None:
        vals, vecs = vals[:ell], vecs[:, :ell]
    return Embedding(_sign_fix(vecs), vals, n_train, L, D)


def embedding_diagnostics(emb: Embedding) -> dict:
    """Worst-case invariant errors of an embedding.

    ``orthonormality``: max |U^T D U - I|; ``constraint``: max |1^T D u| over
    columns; ``residual``: max
    ||L u - lambda D u|| / ||L||_F.
    """
    U, L, D = emb.U, emb.L, emb.D
    d = np.diag(D)
    gram = U.T @ (d[:, None] * U)
    ortho = float(np.max(np.abs(gram - np.eye(U.shape[1]))))
    constraint = float(np.max(np.abs(d @ U)))
    res = L @ U - (d[:, None] * U) * emb.eigenvalues
    resid = float(np.max(np.linalg.norm(res, axis=0)) / np.linalg.norm(L))
    return {"orthonormality": ortho, "constraint": constraint, "residual": resid}
