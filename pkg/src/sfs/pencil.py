"""Indicator prescription and linear matrix pencil assembly.

For a prescribed indicator ``v`` the linearized Laplacian eigenproblem
``W(s) v = mu D(s) v`` together with the constraint ``e^T D(s) v = 0`` is an
eigenproblem of a rectangular pencil in the unknown ``w = [s; -1]``::

    A_full w = mu B_full w,   A_full, B_full in R^{(n+1) x (m+1)}

where the first ``n`` rows of ``A_full w`` and ``B_full w`` are ``-W_lin(s) v``
and ``-D_lin(s) v``, and the last row of ``A_full w`` is ``-e^T D_lin(s) v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .graph import SimilarityGraph

ONE_PER_CLASS = "one_per_class"
BINARY_CODE = "binary_code"
SPLIT_MODES = (ONE_PER_CLASS, BINARY_CODE)


class PencilError(ValueError):
    pass


@dataclass(frozen=True)
class BinarySplit:
    """Two-way partition of the training samples.

    ``t`` is +1 on samples whose class is in ``positive_classes`` and -1
    elsewhere; ``b`` is the weight of the negative side in the indicator.
    """

    positive_classes: frozenset
    t: np.ndarray
    b: float = 1.0

    def __post_init__(self):
        if not (np.any(self.t > 0) and np.any(self.t < 0)):
            raise PencilError(
                f"split {sorted(self.positive_classes)} is single-signed on these labels")
        if not self.b > 0:
            raise PencilError("b must be positive")

    @property
    def v(self) -> np.ndarray:
        return np.where(self.t > 0, 1.0, -self.b)

    def flipped(self, all_classes) -> "BinarySplit":
        return BinarySplit(frozenset(all_classes) - self.positive_classes, -self.t, 1.0 / self.b)

    def with_b(self, b: float) -> "BinarySplit":
        return replace(self, b=float(b))


@dataclass(frozen=True)
class SplitScheme:
    splits: tuple[BinarySplit, ...]
    mode: str

    @property
    def r(self) -> int:
        return len(self.splits)


def class_codes(K: int, mode: str) -> list[frozenset]:
    """Positive class sets for each split of ``mode``."""
    if K < 2:
        raise PencilError("need at least 2 classes")
    if mode == ONE_PER_CLASS:
        if K == 2:
            return [frozenset({1})]
        return [frozenset({p}) for p in range(1, K + 1)]
    if mode == BINARY_CODE:
        bits = math.ceil(math.log2(K))
        return [frozenset(c for c in range(1, K + 1) if (c - 1) >> (bits - 1 - p) & 1)
                for p in range(bits)]
    raise PencilError(f"unknown split mode {mode!r}; choose from {SPLIT_MODES}")


def make_splits(labels, K: int, mode: str = ONE_PER_CLASS) -> SplitScheme:
    """Prescribe ``r`` binary splits of the classes ``1..K``.

    ``one_per_class`` gives split ``p = {p}`` (a single split when K = 2);
    ``binary_code`` puts class ``c`` on the positive side of split ``p``
    when bit ``p`` (most significant first) of ``c - 1`` is set.
    """
    labels = np.asarray(labels)
    splits = []
    for pos in class_codes(K, mode):
        t = np.where(np.isin(labels, list(pos)), 1, -1)
        splits.append(BinarySplit(pos, t))
    return SplitScheme(tuple(splits), mode)


def balance_param(split: BinarySplit, graph: SimilarityGraph) -> float:
    """Degree-volume ratio of the positive side over the negative side."""
    d = graph.d
    den = d[split.t < 0].sum()
    if not den > 0:
        raise PencilError("zero degree volume on the negative side")
    return float(d[split.t > 0].sum() / den)


@dataclass(frozen=True)
class PencilPair:
    A_full: np.ndarray
    B_full: np.ndarray
    split: Optional[BinarySplit] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.A_full.shape


def assemble_pencil(X, v, sigma, split: Optional[BinarySplit] = None) -> PencilPair:
    """Build ``(A_full, B_full)`` for indicator ``v`` and Euclidean local scales ``sigma``."""
    X = np.asarray(X, dtype=float)
    v = np.asarray(v, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n, m = X.shape
    if v.shape != (n,) or sigma.shape != (n,):
        raise PencilError("v and sigma must have one entry per sample")

    # degenerate scales surface as non-finite entries, checked below
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / sigma
        cv = v * inv
        A = np.empty((n, m))
        xhat = np.empty((n, m))
        # row i: sum_j c_j (x_i - x_j)^2 / sigma_i; the j = i term is zero
        for i in range(n):
            diff = X - X[i]
            diff *= diff
            A[i] = cv @ diff
            xhat[i] = inv @ diff
        A *= inv[:, None]
        xhat *= inv[:, None]

    alpha = v.sum() - v
    B = v[:, None] * xhat
    beta = (n - 1) * v
    gamma = v @ xhat
    rho = (n - 1) * v.sum()

    A_full = np.zeros((n + 1, m + 1))
    A_full[:n, :m] = A
    A_full[:n, m] = alpha
    A_full[n, :m] = gamma
    A_full[n, m] = rho
    B_full = np.zeros((n + 1, m + 1))
    B_full[:n, :m] = B
    B_full[:n, m] = beta
    if not (np.all(np.isfinite(A_full)) and np.all(np.isfinite(B_full))):
        raise PencilError("non-finite pencil entries (degenerate local scales?)")
    return PencilPair(A_full, B_full, split)


def stack_pencils(pairs: Sequence[PencilPair]) -> PencilPair:
    """Stack per-split pencils vertically so they share one eigenpair."""
    if not pairs:
        raise PencilError("no pencils to stack")
    cols = {p.A_full.shape[1] for p in pairs}
    if len(cols) != 1:
        raise PencilError(f"mismatched column counts {sorted(cols)}")
    if len(pairs) == 1:
        return pairs[0]
    return PencilPair(np.vstack([p.A_full for p in pairs]),
                      np.vstack([p.B_full for p in pairs]))
