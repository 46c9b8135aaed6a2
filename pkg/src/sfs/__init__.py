"""Supervised spectral embedding with learnt per-feature scaling.

Per-feature scaling factors are learnt from labelled training data by
solving rectangular linear-pencil eigenproblems built from the
spectral-clustering Laplacian; train and test samples are then scaled and
embedded together and classified in the embedding.
"""

from .data import Dataset, RingConfig, generate_rings, kfold_split, load_csv, write_csv
from .eigensolve import PencilSolution, SolverOptions, residual, solve_pencil
from .embed import Embedding, apply_scaling, embedding_diagnostics, spectral_embed
from .evaluate import (EvalReport, PipelineConfig, aa, knn_predict, logistic_predict, nmi, oa,
                       run_pipeline)
from .graph import SimilarityGraph, laplacian, local_scales, similarity_matrix
from .pencil import (BinarySplit, PencilPair, SplitScheme, assemble_pencil, balance_param,
                     make_splits, stack_pencils)
from .pipeline import SFSConfig, learn_scaling, sfs_embed
from .scaling import ScalingResult, integrate, integrate_factors, to_scaling_matrix

__version__ = "0.1.0"

__all__ = [
    "Dataset", "RingConfig", "generate_rings", "kfold_split", "load_csv", "write_csv",
    "PencilSolution", "SolverOptions", "residual", "solve_pencil",
    "Embedding", "apply_scaling", "embedding_diagnostics", "spectral_embed",
    "EvalReport", "PipelineConfig", "aa", "knn_predict", "logistic_predict", "nmi", "oa",
    "run_pipeline",
    "SimilarityGraph", "laplacian", "local_scales", "similarity_matrix",
    "BinarySplit", "PencilPair", "SplitScheme", "assemble_pencil", "balance_param",
    "make_splits", "stack_pencils",
    "SFSConfig", "learn_scaling", "sfs_embed",
    "ScalingResult", "integrate", "integrate_factors", "to_scaling_matrix",
]
