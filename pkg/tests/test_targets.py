import numpy as np
import pytest
from hypothesis import given, strategies as st

from elrlab.targets import TargetTable, ensemble_update, mixup_batch, ramp, refine_labels


def test_ensemble_closed_form():
    table = TargetTable(4, 3, beta=0.7)
    p = np.array([0.2, 0.5, 0.3])
    for _ in range(5):
        table.update([1], p[None])
    np.testing.assert_allclose(table.t[1], (1 - 0.7 ** 5) * p)
    assert not table.t[[0, 2, 3]].any()


def test_beta_zero_copies_prediction():
    table = TargetTable(2, 2, beta=0.0)
    ensemble_update(table, [0, 1], np.array([[0.9, 0.1], [0.4, 0.6]]))
    np.testing.assert_array_equal(table.t, [[0.9, 0.1], [0.4, 0.6]])


def test_uniform_table_ignores_updates():
    table = TargetTable.uniform(3, 4)
    table.update([0], np.array([[1.0, 0, 0, 0]]))
    np.testing.assert_array_equal(table.t, 0.25)
    assert not table.cold


def test_cold_and_bounds():
    table = TargetTable(2, 2)
    assert table.cold
    with pytest.raises(IndexError):
        table.update([2], np.ones((1, 2)) / 2)
    with pytest.raises(ValueError):
        TargetTable(2, 2, beta=1.0)


def test_dumps_format():
    table = TargetTable(2, 2)
    table.update([0], np.array([[0.5, 0.5]]))
    assert table.dumps().splitlines()[0] == "t0,t1"
    assert len(table.dumps().splitlines()) == 3


@given(st.integers(1, 12), st.floats(0.05, 5.0), st.integers(0, 1000))
def test_mixup_is_convex_and_weighted_toward_self(b, alpha, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(b, 3))
    y = np.eye(2)[rng.integers(2, size=b)]
    t = rng.dirichlet(np.ones(2), size=b)
    m = mixup_batch(x, y, t, alpha, rng=seed)
    assert np.all(m.ell_prime >= 0.5) and np.all(m.ell_prime <= 1.0)
    lp = m.ell_prime[:, None]
    np.testing.assert_allclose(m.x, lp * x + (1 - lp) * x[m.partner])
    np.testing.assert_allclose(m.y.sum(axis=1), 1.0)
    np.testing.assert_allclose(m.t.sum(axis=1), 1.0)


def test_mixup_identity_when_ell_one():
    x = np.arange(6.0).reshape(3, 2)
    m = mixup_batch(x, x, x, ell=1.0, partner=np.array([2, 0, 1]))
    np.testing.assert_array_equal(m.x, x)


def test_mixup_ell_prime_folds():
    x = np.array([[1.0], [0.0]])
    m = mixup_batch(x, x, x, ell=np.array([0.2, 0.2]), partner=np.array([1, 0]))
    np.testing.assert_allclose(m.ell_prime, 0.8)
    np.testing.assert_allclose(m.x[:, 0], [0.8, 0.2])


def test_mixup_rejects_bad_input():
    with pytest.raises(ValueError):
        mixup_batch(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
        mixup_batch(np.ones((1, 2)), np.ones((1, 2)), np.ones((1, 2)), alpha=0.0)


def test_refine_labels():
    y = np.array([[0.6, 0.4], [1.0, 0.0]])
    t = np.array([[0.25, 0.75], [0.0, 1.0]])
    r = refine_labels(y, t)
    np.testing.assert_allclose(r[0], [0.15 / 0.45, 0.30 / 0.45])
    # one-hot labels stay one-hot, even against a zero target entry
    np.testing.assert_allclose(r[1], [1.0, 0.0])


def test_ramp_shape():
    assert ramp(0, 100, 3.0) == pytest.approx(3.0 * np.exp(-5))
    assert ramp(100, 100, 3.0) == 3.0
    assert ramp(500, 100, 3.0) == 3.0
    vals = [ramp(i, 50) for i in range(51)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        ramp(1, 0)
