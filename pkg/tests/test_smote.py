import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudforge.errors import TooFewMinoritySamples
from fraudforge.oversample.smote import SmoteConfig, interpolate, nearest_neighbors, smote_generate
from oracles import knn_exhaustive, smote_row_explained


def test_midpoint_example():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    nn = nearest_neighbors(x, 1)
    assert nn[:, 0].tolist() == [1, 0]
    np.testing.assert_allclose(interpolate(x[:1], x[nn[0]], [0.5]), [[0.5, 0.5]])


def test_two_rows_k1_always_on_the_segment():
    x = np.array([[0.0, 0.0], [1.0, 1.0]])
    out = smote_generate(x, SmoteConfig(k_neighbors=1, n_synthetic=200, seed=3))
    np.testing.assert_allclose(out[:, 0], out[:, 1])
    assert out.min() >= 0 and out.max() <= 1


def test_zero_rows_requested():
    out = smote_generate(np.random.default_rng(0).standard_normal((8, 3)), SmoteConfig(n_synthetic=0))
    assert out.shape == (0, 3)


def test_too_few_minority():
    with pytest.raises(TooFewMinoritySamples):
        smote_generate(np.zeros((5, 2)), SmoteConfig(k_neighbors=5, n_synthetic=3))


def test_config_validation():
    with pytest.raises(ValueError):
        SmoteConfig(k_neighbors=0)
    with pytest.raises(ValueError):
        SmoteConfig(n_synthetic=-1)


def test_deterministic_per_seed():
    x = np.random.default_rng(1).standard_normal((20, 4))
    a = smote_generate(x, SmoteConfig(n_synthetic=50, seed=9))
    b = smote_generate(x, SmoteConfig(n_synthetic=50, seed=9))
    c = smote_generate(x, SmoteConfig(n_synthetic=50, seed=10))
    assert a.tobytes() == b.tobytes()
    assert a.tobytes() != c.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(1, 5), st.integers(1, 4), st.integers(0, 10_000))
def test_neighbours_match_exhaustive_scan(n, k, p, seed):
    k = min(k, n - 1)
    x = np.random.default_rng(seed).standard_normal((n, p))
    nn = nearest_neighbors(x, k)
    for i in range(n):
        assert nn[i].tolist() == knn_exhaustive(x, i, k)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 15), st.integers(1, 3), st.integers(1, 5), st.integers(0, 10_000))
def test_every_synthetic_row_lies_on_a_neighbour_segment(n, k, p, seed):
    k = min(k, n - 1)
    x = np.random.default_rng(seed).standard_normal((n, p))
    out = smote_generate(x, SmoteConfig(k_neighbors=k, n_synthetic=20, seed=seed))
    for row in out:
        assert smote_row_explained(row, x, k)
