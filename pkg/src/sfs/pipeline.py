"""Learning the feature scaling from labels and embedding train + test data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .eigensolve import PencilSolution, SolverOptions, solve_pencil
from .embed import Embedding, apply_scaling, spectral_embed
from .graph import local_scales, similarity_matrix
from .pencil import (ONE_PER_CLASS, BinarySplit, PencilPair, assemble_pencil,
                     balance_param, make_splits, stack_pencils)
from .scaling import ScalingResult, integrate_factors

PER_SPLIT = "per_split"
STACKED = "stacked"

# rectangular SFS pencils are almost never exactly singular, so the
# pipeline accepts the nearest singular pencil (any local minimum)
PIPELINE_SOLVER = SolverOptions(accept_tol=None)


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class SFSConfig:
    """Hyperparameters of the scaling step and the embedding graph."""

    split_mode: str = ONE_PER_CLASS
    integration: str = "rms"
    k_local: int = 7
    sparsify_k: Optional[int] = 7
    solve_mode: str = PER_SPLIT
    identity_scaling: bool = False
    solver: SolverOptions = PIPELINE_SOLVER


@dataclass(frozen=True)
class ScalingFit:
    splits: tuple[BinarySplit, ...]
    solutions: tuple[PencilSolution, ...]
    result: ScalingResult

    @property
    def s_half(self) -> np.ndarray:
        return self.result.integrated


def prescribe(X, labels, K: int, cfg: SFSConfig, flips: Sequence[bool] = ()) -> tuple[list[BinarySplit], np.ndarray]:
    """Splits with their balance parameters, plus the Euclidean local scales of ``X``."""
    sigma = local_scales(X, cfg.k_local)
    graph = similarity_matrix(X, None, sigma, k_local=cfg.k_local)
    scheme = make_splits(labels, K, cfg.split_mode)
    classes = range(1, K + 1)
    splits = []
    for p, sp in enumerate(scheme.splits):
        if p < len(flips) and flips[p]:
            sp = sp.flipped(classes)
        splits.append(sp.with_b(balance_param(sp, graph)))
    return splits, sigma


def split_solution(X, split: BinarySplit, sigma, cfg: SFSConfig) -> PencilSolution:
    sol = solve_pencil(assemble_pencil(X, split.v, sigma, split), 1.0, cfg.solver)
    if not sol.converged:
        raise PipelineError(
            f"pencil for split {sorted(split.positive_classes)}: {sol.status}")
    return sol


def learn_scaling(X, labels, K: int, cfg: SFSConfig = SFSConfig(),
                  flips: Sequence[bool] = ()) -> ScalingFit:
    """Per-feature ``S^{1/2}`` from labelled training data."""
    X = np.asarray(X, dtype=float)
    splits, sigma = prescribe(X, labels, K, cfg, flips)
    if cfg.solve_mode == STACKED:
        pencil = stack_pencils([assemble_pencil(X, sp.v, sigma, sp) for sp in splits])
        sol = solve_pencil(pencil, 1.0, cfg.solver)
        if not sol.converged:
            raise PipelineError(f"stacked pencil: {sol.status}")
        sols = (sol,)
    else:
        sols = tuple(split_solution(X, sp, sigma, cfg) for sp in splits)
    result = integrate_factors([s.s for s in sols], cfg.integration)
    return ScalingFit(tuple(splits), sols, result)


def sfs_embed(X, labels, Y, ell: Optional[int], K: int, cfg: SFSConfig = SFSConfig(),
              flips: Sequence[bool] = (), fit: Optional[ScalingFit] = None
              ) -> tuple[Embedding, Optional[ScalingFit]]:
    """Scale ``[X; Y]`` with factors learnt on ``(X, labels)`` and embed it.

    With ``cfg.identity_scaling`` the scaling step is skipped, which is
    plain spectral embedding of the raw samples.
    """
    X = np.asarray(X, dtype=float)
    if cfg.identity_scaling:
        fit, s_half = None, np.ones(X.shape[1])
    else:
        fit = fit or learn_scaling(X, labels, K, cfg, flips)
        s_half = fit.s_half
    Z = apply_scaling(X, Y, s_half)
    emb = spectral_embed(Z, ell, cfg.k_local, cfg.sparsify_k, n_train=X.shape[0])
    return emb, fit
