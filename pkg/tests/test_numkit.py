import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedhp.numkit import NotSymmetricError, Rng, as_sym_matrix, l2_norm, sym_eigenvalues


def test_identity_spectrum():
    assert sym_eigenvalues(np.eye(3)) == pytest.approx([1, 1, 1], abs=1e-12)


def test_triangle_laplacian_spectrum():
    lap = np.array([[2, -1, -1], [-1, 2, -1], [-1, -1, 2]], dtype=float)
    assert sym_eigenvalues(lap) == pytest.approx([0, 3, 3], abs=1e-10)


def test_two_components_have_zero_lambda2():
    lap = np.array([[1, -1, 0, 0], [-1, 1, 0, 0], [0, 0, 1, -1], [0, 0, -1, 1]], dtype=float)
    eigs = sym_eigenvalues(lap)
    assert abs(eigs[1]) < 1e-10


def test_single_entry():
    assert sym_eigenvalues([[4.5]]) == [4.5]


def test_rejects_asymmetric_and_non_finite():
    with pytest.raises(NotSymmetricError):
        sym_eigenvalues([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(NotSymmetricError):
        as_sym_matrix([[1.0, math.nan], [math.nan, 1.0]])
    with pytest.raises(NotSymmetricError):
        as_sym_matrix(np.ones((2, 3)))


def test_budget_exhaustion_raises():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(8, 8))
    with pytest.raises(ArithmeticError):
        sym_eigenvalues(m + m.T, tol=1e-300, max_sweeps=1)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 9).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-50, 50, allow_nan=False))))
def test_matches_numpy_and_trace(m):
    sym = (m + m.T) / 2
    eigs = sym_eigenvalues(sym)
    assert eigs == sorted(eigs)
    np.testing.assert_allclose(eigs, np.linalg.eigvalsh(sym), atol=1e-7 * max(1.0, np.abs(sym).max()))
    assert math.fsum(eigs) == pytest.approx(np.trace(sym), abs=1e-8 * max(1.0, np.abs(sym).sum()))


@pytest.mark.parametrize("v, expected", [([3, 4], 5.0), ([0, 0, 0], 0.0), ([1, 1, 1, 1], 2.0)])
def test_l2_norm(v, expected):
    assert l2_norm(v) == expected


def test_rng_streams_are_reproducible_and_independent():
    a = Rng(7, "batch", 3).uniform(size=5)
    b = Rng(7, "batch", 3).uniform(size=5)
    c = Rng(7, "batch", 4).uniform(size=5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, Rng(8, "batch", 3).uniform(size=5))


def test_child_does_not_consume_parent_draws():
    parent = Rng(1)
    first = Rng(1).uniform()
    parent.child("x").uniform(size=100)
    assert parent.uniform() == first


def test_rng_rejects_bad_seeds():
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(ValueError):
        Rng(2**64)
    with pytest.raises(ValueError):
        Rng(1, -3)


def test_choice_without_replacement_is_distinct():
    idx = Rng(2).choice_without_replacement(10, 20)
    assert sorted(idx.tolist()) == list(range(10))
