import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfs.data import (RING_OFFSET, RING_RADIUS, DataError, Dataset, RingConfig, generate_rings,
                      kfold_split, load_csv, write_csv)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_csv_encodes_labels_in_first_appearance_order(tmp_path):
    p = _write(tmp_path, "x,y,label\n0,1,a\n1,2,a\n2,3,b\n3,5,b\n")
    ds = load_csv(p)
    assert (ds.n, ds.m, ds.K) == (4, 2, 2)
    assert ds.labels.tolist() == [1, 1, 2, 2]
    assert ds.raw_labels == ("a", "b")
    assert ds.feature_names == ("x", "y")


def test_load_csv_label_column_anywhere(tmp_path):
    p = _write(tmp_path, "cls,x\nz,0\ny,1\nz,2\n")
    ds = load_csv(p, label_column="cls")
    assert ds.labels.tolist() == [1, 2, 1]
    assert ds.X[:, 0].tolist() == [0.0, 1.0, 2.0]


def test_load_csv_nan_cell(tmp_path):
    p = _write(tmp_path, "x,y,label\n0,1,a\n1,nan,b\n")
    with pytest.raises(DataError, match=r"non-finite value at row 2, column 2"):
        load_csv(p)


def test_load_csv_single_class(tmp_path):
    p = _write(tmp_path, "x,label\n0,a\n1,a\n")
    with pytest.raises(DataError, match="fewer than 2 classes"):
        load_csv(p)


@pytest.mark.parametrize("text, msg", [
    ("x,label\n0,a\nfoo,b\n", "non-numeric"),
    ("x,y\n0,1\n1,2\n", "label column 'label' not found"),
])
def test_load_csv_rejects(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        load_csv(_write(tmp_path, text))


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="missing file"):
        load_csv(tmp_path / "absent.csv")


def test_csv_round_trip(tmp_path):
    ds = generate_rings(RingConfig(samples_per_class=5, num_features=4, seed=3))
    write_csv(ds, tmp_path / "r.csv")
    back = load_csv(tmp_path / "r.csv")
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.labels, ds.labels)


def test_dataset_invariants():
    with pytest.raises(DataError, match="non-finite value at row 1, column 2"):
        Dataset(np.array([[0.0, np.inf], [1.0, 2.0]]), [1, 2])
    with pytest.raises(DataError, match="fewer than 2 classes"):
        Dataset(np.zeros((3, 1)), [1, 1, 1])
    with pytest.raises(DataError, match="do not appear"):
        Dataset(np.zeros((3, 1)), [1, 3, 3])
    ds = Dataset(np.zeros((2, 1)), [1, 2])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


def test_rings_default_shape_and_counts():
    ds = generate_rings(RingConfig())
    assert (ds.n, ds.m, ds.K) == (600, 10, 3)
    assert np.bincount(ds.labels).tolist() == [0, 200, 200, 200]


@pytest.mark.parametrize("seed", [0, 1, 2, 7])
def test_rings_informative_variances(seed):
    X = generate_rings(RingConfig(seed=seed)).X
    var = X[:, :3].var(axis=0, ddof=1)
    for got, want in zip(var, (0.35, 2.01, 0.19)):
        assert abs(got - want) <= 0.15 * want


def test_rings_noise_variance():
    X = generate_rings(RingConfig(noise_variance=4.0, seed=11)).X
    var = X[:, 3:].var(axis=0, ddof=1)
    assert np.all((var >= 3.0) & (var <= 5.0))


def test_rings_interlock():
    # ring 1's centre line passes through ring 2's disk, so the two interlock
    assert abs(RING_OFFSET - RING_RADIUS) < RING_RADIUS


def test_rings_deterministic():
    a = generate_rings(RingConfig(noise_variance=25.0, seed=5))
    b = generate_rings(RingConfig(noise_variance=25.0, seed=5))
    c = generate_rings(RingConfig(noise_variance=25.0, seed=6))
    assert a.X.tobytes() == b.X.tobytes()
    assert a.X.tobytes() != c.X.tobytes()


@pytest.mark.parametrize("kw", [dict(samples_per_class=0), dict(noise_variance=0.0),
                                dict(num_features=2), dict(num_classes=1)])
def test_ring_config_invalid(kw):
    with pytest.raises(DataError):
        RingConfig(**kw)


def test_kfold_one_per_class_per_fold():
    labels = np.array([1] * 5 + [2] * 5)
    plan = kfold_split(labels, 5, seed=0)
    for f in range(1, 6):
        _, test = plan.train_test(f)
        assert sorted(labels[test].tolist()) == [1, 2]


def test_kfold_deterministic():
    labels = np.array([1] * 5 + [2] * 5)
    assert kfold_split(labels, 5, 4).assignments.tolist() == kfold_split(labels, 5, 4).assignments.tolist()


def test_kfold_small_class():
    with pytest.raises(DataError):
        kfold_split(np.array([1, 1, 1] + [2] * 10), 5)


@settings(max_examples=60, deadline=None)
@given(counts=st.lists(st.integers(5, 40), min_size=2, max_size=5),
       k=st.integers(2, 5), seed=st.integers(0, 2**32 - 1))
def test_kfold_stratified_partition(counts, k, seed):
    labels = np.repeat(np.arange(1, len(counts) + 1), counts)
    np.random.default_rng(seed).shuffle(labels)
    plan = kfold_split(labels, k, seed)
    seen = np.concatenate([plan.train_test(f)[1] for f in range(1, k + 1)])
    assert sorted(seen.tolist()) == list(range(labels.size))
    for c, n_c in enumerate(counts, start=1):
        for f in range(1, k + 1):
            got = np.sum((plan.assignments == f) & (labels == c))
            assert abs(got - n_c / k) < 1
    for f in range(1, k + 1):
        tr, te = plan.train_test(f)
        assert not set(tr) & set(te)
