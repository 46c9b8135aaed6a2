"""Classifiers on embedded coordinates, accuracy metrics and nested cross-validation."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize
from scipy.special import log_softmax, softmax

from .data import Dataset, kfold_split
from .embed import Embedding, embedding_diagnostics
from .pipeline import PipelineError, ScalingFit, SFSConfig, learn_scaling, sfs_embed

DEFAULT_ELL_GRID = (1, 2, 3, 5, 8, 13, 21, 34)


class EvaluationError(ValueError):
    pass


# --------------------------------------------------------------------------
# classifiers

def knn_predict(train_coords, train_labels, test_coords, k: int = 1) -> np.ndarray:
    """Majority vote over the ``k`` Euclidean nearest training rows.

    Vote ties go to the class with the smaller summed neighbor distance,
    then to the smaller class id.
    """
    tr = np.atleast_2d(np.asarray(train_coords, dtype=float))
    te = np.atleast_2d(np.asarray(test_coords, dtype=float))
    y = np.asarray(train_labels)
    if tr.shape[0] == 0:
        raise EvaluationError("empty training set")
    if not 1 <= k <= tr.shape[0]:
        raise EvaluationError(f"k={k} outside 1..{tr.shape[0]}")
    d2 = ((te[:, None, :] - tr[None, :, :]) ** 2).sum(axis=-1)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    out = np.empty(te.shape[0], dtype=y.dtype)
    for i, nb in enumerate(order):
        dist = np.sqrt(d2[i, nb])
        classes = np.unique(y[nb])
        votes = [(-(y[nb] == c).sum(), dist[y[nb] == c].sum(), c) for c in classes]
        out[i] = min(votes)[2]
    return out


@dataclass
class LogisticModel:
    coef: np.ndarray
    intercept: np.ndarray
    classes: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    grad_norm: float

    def predict(self, X) -> np.ndarray:
        Xs = (np.atleast_2d(X) - self.mean) / self.scale
        return self.classes[np.argmax(Xs @ self.coef + self.intercept, axis=1)]


def _logistic_objective(theta, Xa, Y, ridge):
    n, p = Xa.shape
    K = Y.shape[1]
    Th = theta.reshape(p, K)
    logits = Xa @ Th
    logp = log_softmax(logits, axis=1)
    loss = -np.sum(Y * logp) / n + 0.5 * ridge * theta @ theta
    grad = Xa.T @ (np.exp(logp) - Y) / n + ridge * Th
    return loss, grad.ravel()


def _logistic_hessian(theta, Xa, Y, ridge):
    n, p = Xa.shape
    K = Y.shape[1]
    P = softmax(Xa @ theta.reshape(p, K), axis=1)
    H = np.zeros((p, K, p, K))
    for a in range(K):
        for c in range(K):
            w = P[:, a] * ((a == c) - P[:, c])
            H[:, a, :, c] = (Xa * w[:, None]).T @ Xa / n
    H = H.reshape(p * K, p * K)
    H[np.diag_indices_from(H)] += ridge
    return H


def fit_logistic(X, labels, ridge: float = 1e-6, tol: float = 1e-8,
                 max_iter: int = 500) -> LogisticModel:
    """Multinomial logistic regression by a trust-region Newton method.

    Features are standardized with the training mean and scale first;
    the ridge penalty covers every parameter, which makes the problem
    strictly convex even for separable classes.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(labels)
    classes = np.unique(y)
    if classes.size < 2:
        raise EvaluationError("logistic regression needs at least 2 classes")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Xa = np.hstack([(X - mean) / scale, np.ones((X.shape[0], 1))])
    Y = (y[:, None] == classes[None, :]).astype(float)
    theta0 = np.zeros(Xa.shape[1] * classes.size)
    res = minimize(_logistic_objective, theta0, args=(Xa, Y, ridge), jac=True,
                   hess=_logistic_hessian, method="trust-exact",
                   options={"gtol": tol, "maxiter": max_iter})
    gnorm = float(np.linalg.norm(res.jac))
    if gnorm > max(tol, 1e-6):
        raise EvaluationError(f"logistic regression did not converge: gradient norm {gnorm:.3e}")
    Th = res.x.reshape(Xa.shape[1], classes.size)
    return LogisticModel(Th[:-1], Th[-1], classes, mean, scale, gnorm)


def logistic_predict(train_coords, train_labels, test_coords, **kw) -> np.ndarray:
    return fit_logistic(train_coords, train_labels, **kw).predict(test_coords)


def classify(kind: str, train_coords, train_labels, test_coords, knn_k: int = 1) -> np.ndarray:
    if kind == "knn":
        return knn_predict(train_coords, train_labels, test_coords, knn_k)
    if kind == "logistic":
        return logistic_predict(train_coords, train_labels, test_coords)
    raise EvaluationError(f"unknown classifier {kind!r}")


# --------------------------------------------------------------------------
# metrics (percent)

def _check(true, pred, K=None):
    t, p = np.asarray(true), np.asarray(pred)
    if t.shape != p.shape:
        raise EvaluationError("label vectors differ in length")
    if K is not None:
        for arr in (t, p):
            if arr.size and (arr.min() < 1 or arr.max() > K):
                raise EvaluationError(f"label outside 1..{K}")
    return t, p


def oa(true_labels, pred_labels) -> float:
    """Overall accuracy: correctly classified samples over all samples."""
    t, p = _check(true_labels, pred_labels)
    return 100.0 * float(np.mean(t == p))


def aa(true_labels, pred_labels, K: int) -> float:
    """Average of the per-class accuracies over the classes present in ``true_labels``."""
    t, p = _check(true_labels, pred_labels, K)
    per_class = [np.mean(p[t == c] == c) for c in range(1, K + 1) if np.any(t == c)]
    return 100.0 * float(np.mean(per_class))


def _entropy(counts: np.ndarray) -> float:
    q = counts[counts > 0] / counts.sum()
    return float(-(q * np.log(q)).sum())


def nmi(true_labels, pred_labels) -> float:
    """``I(T;P) / sqrt(H(T) H(P))`` in percent; NaN when either labelling is constant."""
    t, p = _check(true_labels, pred_labels)
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    C = np.zeros((ti.max() + 1, pi.max() + 1))
    np.add.at(C, (ti, pi), 1.0)
    ht, hp = _entropy(C.sum(axis=1)), _entropy(C.sum(axis=0))
    if ht == 0.0 or hp == 0.0:
        return math.nan
    J = C / C.sum()
    outer = np.outer(J.sum(axis=1), J.sum(axis=0))
    nz = J > 0
    mi = float((J[nz] * np.log(J[nz] / outer[nz])).sum())
    return 100.0 * mi / math.sqrt(ht * hp)


# --------------------------------------------------------------------------
# nested cross-validation

@dataclass(frozen=True)
class PipelineConfig:
    sfs: SFSConfig = SFSConfig()
    classifier: str = "knn"
    knn_k: int = 1
    ell: Optional[int] = None
    ell_grid: tuple[int, ...] = DEFAULT_ELL_GRID
    outer_folds: int = 5
    inner_folds: int = 4
    orientation_search: bool = True
    seed: int = 0
    threads: int = 1


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    ell: Optional[int] = None
    flips: list = field(default_factory=list)
    oa: float = math.nan
    aa: float = math.nan
    nmi: float = math.nan
    mu: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    b: list = field(default_factory=list)
    scaling: list = field(default_factory=list)
    clamped: int = 0
    embedding_checks: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: Optional[str] = None
    # not serialized
    train_idx: Optional[np.ndarray] = None
    test_idx: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    predicted: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("train_idx", "test_idx", "coords", "predicted"):
            d.pop(key)
        return d


@dataclass
class EvalReport:
    folds: list
    ell_range: tuple
    seed: int

    def _stat(self, key):
        vals = np.array([getattr(f, key) for f in self.folds if f.error is None])
        if vals.size == 0:
            return math.nan, math.nan
        return float(np.mean(vals)), float(np.std(vals))

    @property
    def oa_mean(self): return self._stat("oa")[0]
    @property
    def oa_std(self): return self._stat("oa")[1]
    @property
    def aa_mean(self): return self._stat("aa")[0]
    @property
    def aa_std(self): return self._stat("aa")[1]
    @property
    def nmi_mean(self): return self._stat("nmi")[0]
    @property
    def nmi_std(self): return self._stat("nmi")[1]

    @property
    def failed(self) -> list:
        return [f for f in self.folds if f.error is not None]

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in
                ("oa_mean", "oa_std", "aa_mean", "aa_std", "nmi_mean", "nmi_std")}


def ell_candidates(m: int, n_train: int, cfg: PipelineConfig) -> list[int]:
    """Grid values inside ``1..m`` (``m < n_train``) or ``1..n_train``."""
    top = m if m < n_train else n_train
    return [e for e in cfg.ell_grid if 1 <= e <= top] or [1]


class _InnerCV:
    """Inner-fold state for one outer training portion.

    Per-split pencil solutions depend only on the split orientation, and an
    embedding with all nonzero eigenvectors serves every ``ell``, so both
    are cached.
    """

    def __init__(self, X, y, K, cfg: PipelineConfig, seed: int):
        self.X, self.y, self.K, self.cfg = X, y, K, cfg
        self.plan = list(kfold_split(y, cfg.inner_folds, seed))
        self._emb: dict = {}

    def _embedding(self, f: int, flips: tuple) -> Optional[Embedding]:
        key = (f, flips)
        if key not in self._emb:
            tr, va = self.plan[f]
            try:
                emb, _ = sfs_embed(self.X[tr], self.y[tr], self.X[va], None, self.K,
                                   self.cfg.sfs, flips)
            except (PipelineError, ValueError):
                emb = None
            if emb is not None:
                keep = min(emb.ell, max(self.cfg.ell_grid + ((self.cfg.ell or 1),)))
                emb = Embedding(emb.U[:, :keep], emb.eigenvalues[:keep], emb.n_train, None, None)
            self._emb[key] = emb
        return self._emb[key]

    def score(self, flips: tuple, ell: int) -> float:
        accs = []
        for f, (tr, va) in enumerate(self.plan):
            emb = self._embedding(f, flips)
            if emb is None or emb.ell < ell:
                return -math.inf
            e = emb.truncate(ell)
            pred = classify(self.cfg.classifier, e.train, self.y[tr], e.test, self.cfg.knn_k)
            accs.append(oa(self.y[va], pred))
        return float(np.mean(accs))


def _flip_pass(inner: _InnerCV, flips: list, ell: int, r: int) -> list:
    best = inner.score(tuple(flips), ell)
    for p in range(r):
        trial = list(flips)
        trial[p] = not trial[p]
        sc = inner.score(tuple(trial), ell)
        if sc > best:
            best, flips = sc, trial
    return flips


def select_hyperparameters(X, y, K, cfg: PipelineConfig, seed: int, r: int) -> tuple[int, list]:
    """Inner CV: orientation at ``ell = K - 1``, then ``ell``, then orientation again."""
    ells = ell_candidates(X.shape[1], X.shape[0], cfg)
    flips = [False] * r
    if cfg.ell is not None and not cfg.orientation_search:
        return cfg.ell, flips
    inner = _InnerCV(X, y, K, cfg, seed)
    ell = cfg.ell if cfg.ell is not None else min(max(K - 1, 1), ells[-1])
    if cfg.orientation_search and not cfg.sfs.identity_scaling:
        flips = _flip_pass(inner, flips, ell, r)
    if cfg.ell is None:
        scores = [inner.score(tuple(flips), e) for e in ells]
        ell = ells[int(np.argmax(scores))]
    if cfg.orientation_search and not cfg.sfs.identity_scaling:
        flips = _flip_pass(inner, flips, ell, r)
    return ell, flips


def _num_splits(K: int, cfg: PipelineConfig) -> int:
    from .pencil import class_codes
    return len(class_codes(K, cfg.sfs.split_mode))


def run_fold(ds: Dataset, fold: int, train: np.ndarray, test: np.ndarray,
             cfg: PipelineConfig) -> FoldResult:
    t0 = time.perf_counter()
    K = ds.K
    res = FoldResult(fold, train.size, test.size, train_idx=train, test_idx=test)
    X, y = ds.X[train], ds.labels[train]
    try:
        r = _num_splits(K, cfg)
        ell, flips = select_hyperparameters(X, y, K, cfg, cfg.seed + fold, r)
        res.ell, res.flips = ell, [bool(f) for f in flips]
        emb, fit = sfs_embed(X, y, ds.X[test], ell, K, cfg.sfs, flips)
        pred = classify(cfg.classifier, emb.train, y, emb.test, cfg.knn_k)
        truth = ds.labels[test]
        res.oa, res.aa, res.nmi = oa(truth, pred), aa(truth, pred, K), nmi(truth, pred)
        res.embedding_checks = embedding_diagnostics(emb)
        res.coords, res.predicted = emb.U, pred
        if fit is not None:
            res.mu = [s.mu for s in fit.solutions]
            res.residuals = [s.residual for s in fit.solutions]
            res.b = [sp.b for sp in fit.splits]
            res.scaling = fit.s_half.tolist()
            res.clamped = fit.result.clamped
        else:
            res.scaling = [1.0] * ds.m
    except (PipelineError, ValueError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    res.seconds = time.perf_counter() - t0
    return res


def run_pipeline(ds: Dataset, cfg: PipelineConfig = PipelineConfig()) -> EvalReport:
    """Outer stratified k-fold CV around the full scaling + embedding + classification pipeline."""
    plan = kfold_split(ds.labels, cfg.outer_folds, cfg.seed)
    jobs = [(f, *plan.train_test(f)) for f in range(1, plan.k + 1)]
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            folds = list(pool.map(lambda j: run_fold(ds, *j, cfg), jobs))
    else:
        folds = [run_fold(ds, *j, cfg) for j in jobs]
    n_train = min(j[1].size for j in jobs)
    ells = ell_candidates(ds.m, n_train, cfg)
    return EvalReport(folds, (ells[0], ells[-1]), cfg.seed)
