import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ernn.linalg import (
    DimensionError,
    NonFiniteError,
    add,
    axpy,
    frobenius_distance,
    matvec,
    scale,
    spectral_norm,
    spectral_norm_estimate,
    sub,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_matvec_examples():
    npt.assert_array_equal(matvec(np.eye(3), [1, 2, 3]), [1, 2, 3])
    npt.assert_array_equal(matvec(np.zeros((2, 2)), [5, 7]), [0, 0])
    npt.assert_array_equal(matvec([[1, 2], [3, 4]], [1, 1]), [3, 7])


def test_matvec_dimension_mismatch():
    with pytest.raises(DimensionError, match="3 columns"):
        matvec(np.ones((2, 3)), np.ones(2))


def test_vector_ops():
    x = np.array([1.0, -2.0])
    y = np.array([3.0, 4.0])
    npt.assert_array_equal(axpy(0, x, y), y)
    npt.assert_array_equal(axpy(1, x, np.zeros(2)), x)
    npt.assert_array_equal(axpy(2, [1, 1], [3, 4]), [5, 6])
    npt.assert_array_equal(add(x, y), [4, 2])
    npt.assert_array_equal(sub(x, y), [-2, -6])
    npt.assert_array_equal(scale(-1, x), [-1, 2])
    with pytest.raises(DimensionError):
        add(x, np.ones(3))


def test_overflow_rejected():
    with pytest.raises(NonFiniteError):
        scale(1e308, [10.0])


@pytest.mark.parametrize(
    "A, expected",
    [
        (np.diag([3.0, 1.0]), 3.0),
        (np.eye(4), 1.0),
        (np.array([[0.0, 2.0], [0.0, 0.0]]), 2.0),
    ],
)
def test_spectral_norm_examples(A, expected):
    assert spectral_norm(A) == pytest.approx(expected, abs=1e-8)


def test_spectral_norm_zero_and_nonsquare():
    assert spectral_norm(np.zeros((3, 3))) == 0.0
    with pytest.raises(DimensionError, match="square"):
        spectral_norm(np.ones((2, 3)))


def test_spectral_norm_reports_nonconvergence():
    # Two nearly equal singular values converge slowly.
    A = np.diag([1.0, 0.999999])
    est = spectral_norm_estimate(A, max_iters=2, tol=1e-16)
    assert not est.converged
    assert est.iterations == 2


def test_spectral_norm_matches_svd_on_random_matrices():
    rng = np.random.default_rng(4)
    for n in (1, 2, 5, 12):
        A = rng.standard_normal((n, n))
        assert spectral_norm(A) == pytest.approx(np.linalg.svd(A, compute_uv=False)[0], rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=finite), arrays(np.float64, 4, elements=finite))
def test_spectral_norm_bounds_every_direction(A, u):
    if np.linalg.norm(u) == 0:
        return
    assert spectral_norm(A) >= np.linalg.norm(A @ u) / np.linalg.norm(u) - 1e-6


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 3), elements=finite), st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
def test_spectral_norm_is_absolutely_homogeneous(A, c):
    base = spectral_norm(A)
    assert spectral_norm(c * A) == pytest.approx(abs(c) * base, rel=1e-8, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 5, elements=finite))
def test_matvec_identity_exact(x):
    npt.assert_array_equal(matvec(np.eye(5), x), x)


def test_operations_are_pure():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    x = np.array([1.0, -1.0])
    A0, x0 = A.copy(), x.copy()
    first = matvec(A, x)
    second = matvec(A, x)
    spectral_norm(A)
    axpy(2.0, x, x)
    npt.assert_array_equal(A, A0)
    npt.assert_array_equal(x, x0)
    npt.assert_array_equal(first, second)
    assert spectral_norm(A) == spectral_norm(A)


def test_frobenius_distance():
    A = np.arange(4.0).reshape(2, 2)
    assert frobenius_distance(A, A) == 0.0
    assert frobenius_distance(np.eye(2), np.zeros((2, 2))) == pytest.approx(np.sqrt(2))
    assert frobenius_distance(np.eye(2), [[0, 1], [1, 0]]) == pytest.approx(2.0)
    with pytest.raises(DimensionError):
        frobenius_distance(np.eye(2), np.eye(3))
