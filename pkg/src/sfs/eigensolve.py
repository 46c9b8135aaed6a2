"""Eigenpairs of rectangular linear pencils ``A w = mu B w``.

A rectangular pencil generally has no exact eigenpair; the pair returned is
the one needing the smallest perturbation, i.e. a local minimizer ``mu`` of
``sigma_min(A - mu B)`` with ``w`` the matching right singular vector.
Wide pencils are first restricted to the joint row space of ``A`` and ``B``,
which removes the directions that every ``mu`` would annihilate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .pencil import PencilPair

CONVERGED = "converged"
NO_EIGENVALUE = "no_eigenvalue_below_one"
DEGENERATE = "degenerate_normalization"

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverOptions:
    """Search constants for :func:`solve_pencil`.

    ``accept_tol`` is relative to ``||A||_F + ||B||_F``; ``None`` accepts
    every local minimum of ``sigma_min`` (nearest-pencil semantics).
    """

    span: float = 2.0
    gap: float = 1e-6
    grid: int = 400
    refine_width: float = 1e-10
    max_refine: int = 200
    accept_tol: Optional[float] = 1e-6
    normalize_tol: float = 1e-8


@dataclass(frozen=True)
class PencilSolution:
    mu: float
    w: np.ndarray
    residual: float
    status: str
    sigma_min: float = math.nan

    @property
    def s(self) -> np.ndarray:
        return self.w[:-1]

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


class SolverError(ValueError):
    pass


def residual(p: PencilPair, mu: float, w) -> float:
    """``||(A - mu B) w|| / ((||A||_F + |mu| ||B||_F) ||w||)``."""
    w = np.asarray(w, dtype=float)
    A, B = p.A_full, p.B_full
    if w.shape != (A.shape[1],):
        raise SolverError(f"w has shape {w.shape}, expected ({A.shape[1]},)")
    nw = np.linalg.norm(w)
    if nw == 0:
        raise SolverError("zero vector")
    scale = (np.linalg.norm(A) + abs(mu) * np.linalg.norm(B)) * nw
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(A @ w - mu * (B @ w)) / scale)


def _row_space(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the joint row space of ``A`` and ``B``."""
    M = np.vstack([A, B])
    _, sv, Vt = la.svd(M, full_matrices=False)
    tol = max(M.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    return Vt[:rank].T


def _compress(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Square-ish ``(R_A, R_B)`` with the same singular values of ``R_A - mu R_B``."""
    c = A.shape[1]
    if A.shape[0] <= 2 * c:
        return A, B
    R = la.qr(np.hstack([A, B]), mode="r")[0]
    return R[:, :c], R[:, c:]


def _smin(RA, RB, mu) -> float:
    return float(la.svdvals(RA - mu * RB)[-1])


def _golden(f, lo: float, hi: float, width: float, max_iter: int) -> float:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= width:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return c if fc <= fd else d


def local_minima(RA, RB, target: float, opts: SolverOptions) -> list[tuple[float, float]]:
    """Refined local minima ``(mu, sigma_min)`` of the search interval, ascending in mu."""
    lo, hi = target - opts.span, target - opts.gap
    grid = np.linspace(lo, hi, opts.grid)
    vals = np.array([_smin(RA, RB, mu) for mu in grid])
    f = lambda mu: _smin(RA, RB, mu)
    out = []
    for i in range(opts.grid):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < opts.grid - 1 else np.inf
        if vals[i] <= left and vals[i] < right or vals[i] < left and vals[i] <= right:
            a, b = grid[max(i - 1, 0)], grid[min(i + 1, opts.grid - 1)]
            mu = _golden(f, a, b, opts.refine_width, opts.max_refine)
            out.append((mu, f(mu)))
    return out


def _solve_tall(A, B, target, opts: SolverOptions):
    RA, RB = _compress(A, B)
    thresh = math.inf if opts.accept_tol is None else (
        opts.accept_tol * (np.linalg.norm(A) + np.linalg.norm(B)))
    cands = [(mu, sm) for mu, sm in local_minima(RA, RB, target, opts)
             if sm <= thresh and mu < target]
    if not cands:
        return None
    mu, sm = max(cands, key=lambda c: c[0])
    _, _, Vt = la.svd(RA - mu * RB, full_matrices=False)
    return mu, Vt[-1], sm


def _solve_underdetermined(A, B, target, opts: SolverOptions):
    # every mu is an eigenvalue here; take the minimum-norm eigenvector
    # with last entry -1 and the mu in the search interval minimizing its norm
    A1, a = A[:, :-1], A[:, -1]
    B1, b = B[:, :-1], B[:, -1]

    def sol(mu):
        s = la.lstsq(A1 - mu * B1, a - mu * b, lapack_driver="gelsd")[0]
        return np.append(s, -1.0)

    grid = np.linspace(target - opts.span, target - opts.gap, opts.grid)
    norms = np.array([np.linalg.norm(sol(mu)) for mu in grid])
    i = int(np.argmin(norms))
    a_, b_ = grid[max(i - 1, 0)], grid[min(i + 1, opts.grid - 1)]
    mu = _golden(lambda x: float(np.linalg.norm(sol(x))), a_, b_,
                 opts.refine_width, opts.max_refine)
    w = sol(mu)
    return mu, w / np.linalg.norm(w), 0.0


def solve_pencil(p: PencilPair, target: float = 1.0,
                 opts: Optional[SolverOptions] = None) -> PencilSolution:
    """Eigenpair of ``A w = mu B w`` with ``mu`` the largest admissible value below ``target``.

    The returned ``w`` is scaled so that its last entry is -1. Search is
    a fixed grid followed by golden-section refinement, so identical input
    gives bit-identical output.
    """
    opts = opts or SolverOptions()
    A, B = np.asarray(p.A_full, float), np.asarray(p.B_full, float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise SolverError("pencil has non-finite entries")
    rows, cols = A.shape

    Q = None
    if rows < cols:
        Q = _row_space(A, B)
        A, B = A @ Q, B @ Q
        if A.shape[1] > A.shape[0]:
            found = _solve_underdetermined(p.A_full, p.B_full, target, opts)
            Q = None
        else:
            found = _solve_tall(A, B, target, opts)
    else:
        found = _solve_tall(A, B, target, opts)

    if found is None:
        nan = np.full(cols, np.nan)
        return PencilSolution(math.nan, nan, math.nan, NO_EIGENVALUE)
    mu, y, sm = found
    w = Q @ y if Q is not None else y
    if abs(w[-1]) < opts.normalize_tol * np.linalg.norm(w):
        return PencilSolution(mu, w, residual(p, mu, w), DEGENERATE, sm)
    w = -w / w[-1]
    return PencilSolution(float(mu), w, residual(p, mu, w), CONVERGED, sm)
