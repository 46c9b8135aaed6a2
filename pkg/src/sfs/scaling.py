"""Merging per-split candidate scaling factors into one diagonal scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METHODS = ("pca", "arithmetic", "geometric", "rms", "harmonic")


class ScalingError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingResult:
    """Candidates ``sqrt|s^(p)|`` (m x r) and the merged ``S^{1/2}`` diagonal."""

    candidates: np.ndarray
    integrated: np.ndarray
    method: str
    sign_policy: str = "absolute_value"
    clamped: int = 0


def candidate_matrix(factors) -> np.ndarray:
    """Stack raw per-split factors ``s^(p)`` as columns of ``sqrt(|s|)``."""
    F = np.atleast_2d(np.asarray(factors, dtype=float))
    if F.ndim != 2:
        raise ScalingError("factors must be a list of m-vectors")
    # rows of F are splits; transpose to m x r
    return np.sqrt(np.abs(F)).T


def _pca(C: np.ndarray) -> tuple[np.ndarray, int]:
    mu = C.mean(axis=0)
    dev = C - mu
    M = dev.T @ dev
    _, vecs = np.linalg.eigh(M)
    phi = vecs[:, -1]
    if np.allclose(M, 0.0):
        # no spread between features: every direction is principal
        phi = np.full(C.shape[1], 1.0 / np.sqrt(C.shape[1]))
    # 1/sqrt(r) makes r identical candidate columns map back to that column
    proj = C @ phi / np.sqrt(C.shape[1])
    if proj.sum() < 0:
        proj = -proj
    clamped = int(np.sum(proj < 0))
    return np.maximum(proj, 0.0), clamped


def integrate(candidates, method: str = "rms") -> np.ndarray:
    """Merge the ``r`` columns of an ``m x r`` candidate matrix row-wise."""
    return _integrate(candidates, method)[0]


def _integrate(candidates, method: str) -> tuple[np.ndarray, int]:
    C = np.asarray(candidates, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if not np.all(np.isfinite(C)):
        raise ScalingError("candidate factors must be finite")
    r = C.shape[1]
    if method == "arithmetic":
        return C.mean(axis=1), 0
    if method == "rms":
        return np.sqrt((C * C).mean(axis=1)), 0
    if method == "geometric":
        if np.any(C < 0):
            raise ScalingError("geometric mean needs non-negative candidates")
        # a zero candidate zeroes the feature
        with np.errstate(divide="ignore"):
            return np.exp(np.log(C).mean(axis=1)), 0
    if method == "harmonic":
        if np.any(C <= 0):
            raise ScalingError("zero candidate factor")
        return r / (1.0 / C).sum(axis=1), 0
    if method == "pca":
        return _pca(C)
    raise ScalingError(f"unknown integration method {method!r}; choose from {METHODS}")


def integrate_factors(factors, method: str = "rms") -> ScalingResult:
    """Sign policy plus merge: ``sqrt(|s^(p)|)`` per split, then ``method``."""
    C = candidate_matrix(factors)
    merged, clamped = _integrate(C, method)
    return ScalingResult(C, merged, method, clamped=clamped)


def to_scaling_matrix(integrated) -> tuple[np.ndarray, np.ndarray]:
    """``(S, S^{1/2})`` as dense diagonal matrices."""
    h = np.asarray(integrated, dtype=float)
    if np.any(h < 0):
        raise ScalingError("negative scaling factor")
    return np.diag(h * h), np.diag(h)
