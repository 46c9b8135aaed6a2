import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import nmi_counts
from sfs.data import Dataset, RingConfig, generate_rings
from sfs.eigensolve import SolverOptions
from sfs.evaluate import (EvaluationError, PipelineConfig, _logistic_hessian,
                          _logistic_objective, aa, ell_candidates, fit_logistic, knn_predict,
                          logistic_predict, nmi, oa, run_pipeline)
from sfs.pipeline import SFSConfig


# -- k-NN --------------------------------------------------------------------

def test_knn_exact_match():
    tr = np.array([[0.0], [1.0], [2.0]])
    assert knn_predict(tr, [1, 2, 3], [[1.0]], k=1).tolist() == [2]


def test_knn_majority():
    tr = np.array([[0.0], [0.1], [0.2], [5.0]])
    assert knn_predict(tr, [1, 1, 2, 2], [[0.05]], k=3).tolist() == [1]


def test_knn_tie_smaller_distance():
    tr = np.array([[0.5], [-1.0]])
    assert knn_predict(tr, [1, 2], [[0.0]], k=2).tolist() == [1]
    assert knn_predict(tr, [2, 1], [[0.0]], k=2).tolist() == [2]


def test_knn_tie_smaller_class_id():
    tr = np.array([[1.0], [-1.0]])
    assert knn_predict(tr, [2, 1], [[0.0]], k=2).tolist() == [1]


def test_knn_errors():
    with pytest.raises(EvaluationError, match="empty"):
        knn_predict(np.empty((0, 2)), [], [[0.0, 0.0]])
    with pytest.raises(EvaluationError):
        knn_predict([[0.0]], [1], [[0.0]], k=2)


# -- logistic regression -----------------------------------------------------

def test_logistic_separable_training_accuracy():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y = np.array([1, 1, 1, 2, 2, 2])
    assert logistic_predict(X, y, X).tolist() == y.tolist()


def test_logistic_symmetric_boundary():
    X = np.array([[-1.0], [1.0]])
    y = np.array([1, 2])
    eps = 1e-3
    assert logistic_predict(X, y, [[eps], [-eps]]).tolist() == [2, 1]


def test_logistic_gradient_small_at_optimum():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(c, 1.0, (20, 3)) for c in (0, 2, 4)])
    y = np.repeat([1, 2, 3], 20)
    model = fit_logistic(X, y)
    assert model.grad_norm <= 1e-6


def test_logistic_gradient_and_hessian_finite_differences():
    rng = np.random.default_rng(1)
    Xa = np.hstack([rng.standard_normal((15, 2)), np.ones((15, 1))])
    Y = np.eye(3)[rng.integers(0, 3, 15)]
    h = 1e-6
    for _ in range(5):
        th = rng.standard_normal(9)
        _, g = _logistic_objective(th, Xa, Y, 1e-6)
        H = _logistic_hessian(th, Xa, Y, 1e-6)
        fd = np.empty(9)
        fdH = np.empty((9, 9))
        for i in range(9):
            e = np.zeros(9)
            e[i] = h
            fd[i] = (_logistic_objective(th + e, Xa, Y, 1e-6)[0]
                     - _logistic_objective(th - e, Xa, Y, 1e-6)[0]) / (2 * h)
            fdH[:, i] = (_logistic_objective(th + e, Xa, Y, 1e-6)[1]
                         - _logistic_objective(th - e, Xa, Y, 1e-6)[1]) / (2 * h)
        np.testing.assert_allclose(g, fd, atol=1e-8)
        np.testing.assert_allclose(H, fdH, atol=1e-7)


def test_logistic_single_class():
    with pytest.raises(EvaluationError):
        fit_logistic([[0.0], [1.0]], [1, 1])


# -- metrics -----------------------------------------------------------------

def test_metric_examples():
    assert oa([1, 2, 2], [1, 2, 2]) == 100.0 and aa([1, 2, 2], [1, 2, 2], 2) == 100.0
    t, p = [1, 1, 2, 2], [1, 2, 2, 2]
    assert oa(t, p) == 75.0 and aa(t, p, 2) == 75.0
    t = [1] * 10 + [2] * 2
    p = [1] * 12
    assert oa(t, p) == pytest.approx(250 / 3) and aa(t, p, 2) == 50.0


def test_metric_errors():
    with pytest.raises(EvaluationError, match="outside"):
        aa([1, 3], [1, 1], 2)
    with pytest.raises(EvaluationError):
        oa([1, 2], [1])


def test_nmi_examples():
    assert nmi([1, 1, 2, 2, 3], [1, 1, 2, 2, 3]) == pytest.approx(100.0)
    assert math.isnan(nmi([1, 2, 3], [2, 2, 2]))
    assert math.isnan(nmi([1, 1, 1], [1, 2, 3]))
    assert nmi([1, 1, 2, 2], [2, 2, 1, 1]) == pytest.approx(100.0)


labels = st.lists(st.integers(1, 4), min_size=2, max_size=40)


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_nmi_matches_oracle(data):
    t = data.draw(labels)
    p = data.draw(st.lists(st.integers(1, 4), min_size=len(t), max_size=len(t)))
    want = nmi_counts(t, p)
    got = nmi(t, p)
    if math.isnan(want):
        assert math.isnan(got)
    else:
        assert got == pytest.approx(want, abs=1e-9)
        assert -1e-9 <= got <= 100 + 1e-9


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_metric_invariances(data):
    t = np.array(data.draw(labels))
    p = np.array(data.draw(st.lists(st.integers(1, 4), min_size=t.size, max_size=t.size)))
    perm = np.array(data.draw(st.permutations(range(t.size))))
    relabel = np.array([0, *data.draw(st.permutations([1, 2, 3, 4]))])
    assert oa(t[perm], p[perm]) == pytest.approx(oa(t, p))
    assert aa(t[perm], p[perm], 4) == pytest.approx(aa(t, p, 4))
    assert 0 <= aa(t, p, 4) <= 100
    a, b = nmi(t, p), nmi(relabel[t], relabel[p])
    assert (math.isnan(a) and math.isnan(b)) or a == pytest.approx(b, abs=1e-9)
    c = nmi(t[perm], p[perm])
    assert (math.isnan(a) and math.isnan(c)) or a == pytest.approx(c, abs=1e-9)


def test_oa_equals_aa_balanced_equal_recall():
    t = np.repeat([1, 2, 3], 4)
    p = t.copy()
    p[[0, 4, 8]] = [2, 3, 1]
    assert oa(t, p) == pytest.approx(aa(t, p, 3))


# -- pipeline ----------------------------------------------------------------

def test_ell_candidates_cap():
    cfg = PipelineConfig()
    assert ell_candidates(10, 480, cfg) == [1, 2, 3, 5, 8]
    assert ell_candidates(100, 20, cfg) == [1, 2, 3, 5, 8, 13]


SMALL = RingConfig(samples_per_class=25, num_features=5, seed=3)


def test_pipeline_deterministic():
    ds = generate_rings(SMALL)
    cfg = PipelineConfig(outer_folds=3, inner_folds=3, ell_grid=(1, 2, 3))
    a, b = run_pipeline(ds, cfg), run_pipeline(ds, cfg)
    assert [f.to_dict() | {"seconds": 0} for f in a.folds] == \
           [f.to_dict() | {"seconds": 0} for f in b.folds]
    assert not a.failed
    for f in a.folds:
        assert f.ell in (1, 2, 3) and len(f.flips) == 3 and len(f.mu) == 3
        assert all(m < 1 for m in f.mu)


def test_pipeline_parallel_folds_match_serial():
    ds = generate_rings(SMALL)
    cfg = PipelineConfig(outer_folds=3, inner_folds=3, ell=2, orientation_search=False)
    a = run_pipeline(ds, cfg)
    b = run_pipeline(ds, PipelineConfig(outer_folds=3, inner_folds=3, ell=2,
                                        orientation_search=False, threads=3))
    assert [f.oa for f in a.folds] == [f.oa for f in b.folds]


def test_pipeline_shuffled_labels_near_chance():
    ds = generate_rings(RingConfig(samples_per_class=60, seed=8))
    shuffled = Dataset(ds.X, np.random.default_rng(0).permutation(ds.labels))
    rep = run_pipeline(shuffled, PipelineConfig(ell=5, orientation_search=False))
    assert abs(rep.oa_mean - 100 / 3) <= 10


def test_pipeline_identity_scaling():
    ds = generate_rings(SMALL)
    cfg = PipelineConfig(sfs=SFSConfig(identity_scaling=True), outer_folds=3, inner_folds=3, ell=2)
    rep = run_pipeline(ds, cfg)
    assert all(f.scaling == [1.0] * ds.m and f.mu == [] for f in rep.folds)


def test_pipeline_logistic_classifier():
    ds = generate_rings(SMALL)
    rep = run_pipeline(ds, PipelineConfig(classifier="logistic", outer_folds=3, inner_folds=3,
                                          ell=3, orientation_search=False))
    assert not rep.failed and 0 <= rep.oa_mean <= 100


def test_pipeline_strict_solver_reports_failed_folds():
    ds = generate_rings(SMALL)
    cfg = PipelineConfig(sfs=SFSConfig(solver=SolverOptions(accept_tol=1e-6)), outer_folds=3,
                         inner_folds=3, ell=2, orientation_search=False)
    rep = run_pipeline(ds, cfg)
    assert len(rep.failed) == 3
    assert "no_eigenvalue_below_one" in rep.folds[0].error
    assert math.isnan(rep.oa_mean)
