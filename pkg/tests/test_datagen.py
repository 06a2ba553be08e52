import numpy as np
import pytest

from elrlab.datagen import (dumps_dataset, fingerprint, gen_mixture, inject_asymmetric_noise,
                            inject_symmetric_noise, loads_dataset, make_dataset, relabel)


def test_shapes_and_determinism():
    a = gen_mixture(30, 7, seed=3)
    b = gen_mixture(30, 7, seed=3)
    assert a.inputs.shape == (30, 7) and a.true_labels.shape == (30, 2)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    assert not np.array_equal(a.inputs, gen_mixture(30, 7, seed=4).inputs)


def test_two_class_means_are_plus_minus_unit_v():
    d = gen_mixture(10, 5, seed=0)
    assert np.linalg.norm(d.v) == pytest.approx(1.0)
    np.testing.assert_array_equal(d.means[1], -d.means[0])


def test_supplied_v_is_normalized():
    d = gen_mixture(10, 3, v=np.array([3.0, 0.0, 4.0]))
    np.testing.assert_allclose(d.v, [0.6, 0, 0.8])


def test_sigma_zero_puts_points_on_means():
    d = gen_mixture(20, 4, sigma=0.0, seed=1)
    np.testing.assert_array_equal(d.inputs, d.means[d.true_class])


def test_cluster_statistics():
    d = gen_mixture(20_000, 3, sigma=0.5, seed=2)
    resid = d.inputs - d.means[d.true_class]
    assert resid.std() == pytest.approx(0.5, rel=0.02)
    assert d.true_class.mean() == pytest.approx(0.5, abs=0.02)


def test_multiclass_means_orthonormal():
    d = gen_mixture(50, 6, n_classes=4, seed=0)
    np.testing.assert_allclose(d.means @ d.means.T, np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        gen_mixture(10, 3, n_classes=4)
    with pytest.raises(ValueError):
        d.v


def test_arrays_are_read_only():
    d = make_dataset(10, 3, delta=0.3)
    with pytest.raises(ValueError):
        d.inputs[0, 0] = 1.0


@pytest.mark.parametrize("c", [2, 3, 10])
def test_symmetric_noise_rate(c):
    clean = gen_mixture(40_000, 10, n_classes=c, seed=0)
    noisy = inject_symmetric_noise(clean, 0.4, seed=0)
    expected = 0.4 * (c - 1) / c
    se = np.sqrt(expected * (1 - expected) / clean.n)
    assert abs(noisy.wrong_fraction - expected) < 5 * se


def test_exclude_true_class_rate():
    clean = gen_mixture(40_000, 4, n_classes=3, seed=0)
    noisy = inject_symmetric_noise(clean, 0.4, seed=0, exclude_true_class=True)
    assert noisy.wrong_fraction == pytest.approx(0.4, abs=0.015)


def test_clean_and_wrong_sets_partition():
    d = make_dataset(200, 5, n_classes=3, delta=0.5, seed=1)
    both = np.sort(np.concatenate([d.clean_set, d.wrong_set]))
    np.testing.assert_array_equal(both, np.arange(200))
    assert np.all(d.observed_class[d.wrong_set] != d.true_class[d.wrong_set])
    assert np.all(d.observed_class[d.clean_set] == d.true_class[d.clean_set])


def test_delta_extremes():
    clean = gen_mixture(100, 3, seed=0)
    assert len(inject_symmetric_noise(clean, 0.0).wrong_set) == 0
    assert len(inject_asymmetric_noise(clean, 1.0).wrong_set) == 100
    with pytest.raises(ValueError):
        inject_symmetric_noise(clean, 1.5)


def test_asymmetric_noise_cycles_classes():
    d = inject_asymmetric_noise(gen_mixture(300, 5, n_classes=3, seed=0), 0.5, seed=0)
    w = d.wrong_set
    np.testing.assert_array_equal(d.observed_class[w], (d.true_class[w] + 1) % 3)


def test_signs_for_two_classes():
    d = make_dataset(50, 4, delta=0.4, seed=0)
    np.testing.assert_array_equal(d.true_sign == 1, d.true_class == 0)
    np.testing.assert_array_equal(d.observed_sign == 1, d.observed_class == 0)


def test_relabel_recomputes_sets():
    d = make_dataset(20, 3, delta=0.0, seed=0)
    obs = d.true_class.copy()
    obs[:5] = 1 - obs[:5]
    r = relabel(d, obs)
    np.testing.assert_array_equal(r.wrong_set, np.arange(5))


def test_text_round_trip_and_fingerprint():
    d = make_dataset(25, 4, n_classes=3, delta=0.4, seed=5)
    back = loads_dataset(dumps_dataset(d), n_classes=3)
    np.testing.assert_array_equal(back.inputs, d.inputs)
    np.testing.assert_array_equal(back.observed_labels, d.observed_labels)
    assert fingerprint(back) == fingerprint(d)
    assert fingerprint(d) != fingerprint(make_dataset(25, 4, n_classes=3, delta=0.4, seed=6))


def test_unknown_noise_model():
    with pytest.raises(ValueError):
        make_dataset(10, 2, delta=0.1, noise="pairflip")


def test_asymmetric_per_class_flip_rate():
    d = inject_asymmetric_noise(gen_mixture(20_000, 6, n_classes=4, seed=3), 0.3, seed=3)
    for c in range(4):
        members = d.true_class == c
        rate = np.mean(d.observed_class[members] != c)
        assert abs(rate - 0.3) < 4 * np.sqrt(0.3 * 0.7 / members.sum())


def test_noise_independent_of_inputs():
    from scipy.stats import chi2_contingency
    d = make_dataset(20_000, 5, sigma=0.5, delta=0.4, seed=4)
    wrong = np.zeros(d.n, dtype=bool)
    wrong[d.wrong_set] = True
    for j in range(d.p):
        pos = d.inputs[:, j] > 0
        table = [[np.sum(pos & wrong), np.sum(pos & ~wrong)], [np.sum(~pos & wrong), np.sum(~pos & ~wrong)]]
        assert chi2_contingency(table).pvalue > 1e-4


def test_reconstruction_noise_scale():
    d = gen_mixture(10_000, 8, sigma=0.3, seed=5)
    eps = np.where(d.true_class == 0, 1.0, -1.0)
    resid = eps[:, None] * d.inputs - d.v
    assert np.all(np.abs(resid.std(axis=0) / 0.3 - 1) < 0.05)
