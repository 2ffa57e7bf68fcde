import numpy as np
import pytest
from hypothesis import given, strategies as st

from dictphase import measure
from dictphase.measure import (PhaselessObservation, add_bounded_noise,
                               gaussian_ensemble, phaseless_forward, row_restrict)


def test_gaussian_ensemble_examples():
    a = gaussian_ensemble(3, 2, 7)
    assert np.array_equal(a.matrix, gaussian_ensemble(3, 2, 7).matrix)
    one = gaussian_ensemble(1, 1, 4).matrix
    assert one.shape == (1, 1) and np.isfinite(one[0, 0])
    # 3 sigma / sqrt(mn) = 3/200 < 0.02
    assert abs(gaussian_ensemble(200, 200, 0).matrix.mean()) <= 0.02


def test_gaussian_rows_are_nested_in_m():
    small = gaussian_ensemble(5, 4, 3).matrix
    big = gaussian_ensemble(9, 4, 3).matrix
    assert np.array_equal(big[:5], small)


def test_phaseless_forward_examples():
    assert phaseless_forward(np.eye(2), np.array([3.0, -4.0])).tolist() == [3.0, 4.0]
    A = gaussian_ensemble(5, 3, 1)
    assert not np.any(phaseless_forward(A, np.zeros(3)))
    x = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(phaseless_forward(A, -x), phaseless_forward(A, x))


def test_phaseless_forward_matches_abs():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        m, n = rng.integers(1, 8, size=2)
        A = rng.standard_normal((m, n))
        x = rng.standard_normal(n)
        assert np.array_equal(phaseless_forward(A, x), np.abs(A @ x))


def test_noise_examples():
    b = np.array([1.0, 2.0, 0.5])
    assert np.array_equal(add_bounded_noise(b, 0.0, 3).b, b)
    obs = add_bounded_noise(np.ones(4), 0.1, 11)
    # frozen from an independent Philox draw: direction g, radius 0.1*U
    expected = [1.0538135126495514, 1.0583830716198512, 1.028936445699558, 1.0361156221294658]
    assert obs.b.tolist() == expected
    assert np.linalg.norm(obs.b - 1.0) <= 0.1


@given(st.integers(0, 2**32), st.floats(0, 5), st.integers(1, 12))
def test_noise_budget_property(seed, eps, m):
    rng = np.random.default_rng(seed)
    b = np.abs(rng.standard_normal(m)) * (rng.random(m) < 0.7)
    obs = add_bounded_noise(b, eps, seed)
    assert np.linalg.norm(obs.b - b) <= eps
    assert np.all(obs.b >= 0)


def test_noise_budget_many_draws():
    rng = np.random.default_rng(5)
    for i in range(1000):
        b = np.abs(rng.standard_normal(6)) * 0.05
        obs = add_bounded_noise(b, 0.3, i)
        assert np.linalg.norm(obs.b - b) <= 0.3 and np.all(obs.b >= 0)


def test_row_restrict_examples():
    A = gaussian_ensemble(5, 3, 2)
    assert np.array_equal(row_restrict(A, range(5)).matrix, A.matrix)
    empty = row_restrict(A, [])
    assert empty.matrix.shape == (0, 3)
    assert np.array_equal(row_restrict(A, [3]).matrix, A.matrix[[3]])
    with pytest.raises(IndexError):
        row_restrict(A, [5])


@given(st.integers(1, 10), st.integers(0, 2**20))
def test_row_restrict_partition(m, seed):
    A = gaussian_ensemble(m, 3, seed)
    mask = np.random.default_rng(seed).random(m) < 0.5
    T, Tc = np.flatnonzero(mask), np.flatnonzero(~mask)
    stacked = np.vstack([row_restrict(A, T).matrix, row_restrict(A, Tc).matrix])
    order = np.concatenate([T, Tc])
    assert np.array_equal(stacked, A.matrix[order])
    assert row_restrict(A, T).rows == tuple(int(i) for i in T)


def test_observation_validation_and_json():
    with pytest.raises(ValueError):
        PhaselessObservation(np.array([-1.0]))
    with pytest.raises(ValueError):
        add_bounded_noise(np.ones(2), -0.1, 0)
    obs = add_bounded_noise(np.ones(3), 0.2, 1)
    back = PhaselessObservation.from_json(obs.to_json())
    assert np.array_equal(back.b, obs.b) and back.eps == obs.eps
    A = gaussian_ensemble(4, 2, 8)
    B = measure.ensemble_from_json(measure.ensemble_to_json(A))
    assert np.array_equal(A.matrix, B.matrix) and B.seed == 8


def test_shape_mismatch():
    with pytest.raises(ValueError):
        phaseless_forward(np.eye(2), np.ones(3))
