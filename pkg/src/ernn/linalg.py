"""Small dense linear-algebra kernel.

Matrices and vectors are plain float64 numpy arrays (2-D and 1-D). Every
function validates shapes, never mutates its inputs and rejects results
containing NaN or Inf.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

POWER_ITERATION_SEED = 20190125


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


class NonFiniteError(ArithmeticError):
    """Raised when an operation would produce NaN or Inf entries."""


class SpectralEstimate(NamedTuple):
    value: float
    iterations: int
    converged: bool


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def as_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def _finite(out: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"{op} produced non-finite entries")
    return out


def _same_length(x: np.ndarray, y: np.ndarray, op: str) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"{op}: length mismatch {x.shape[0]} vs {y.shape[0]}")


def matvec(A, x) -> np.ndarray:
    """Return ``A @ x`` after checking ``A.cols == len(x)``."""
    A = as_matrix(A, "A")
    x = as_vector(x, "x")
    if A.shape[1] != x.shape[0]:
        raise DimensionError(
            f"matvec: A has {A.shape[1]} columns but x has length {x.shape[0]}"
        )
    return _finite(A @ x, "matvec")


def add(x, y) -> np.ndarray:
    x, y = as_vector(x, "x"), as_vector(y, "y")
    _same_length(x, y, "add")
    return _finite(x + y, "add")


def sub(x, y) -> np.ndarray:
    x, y = as_vector(x, "x"), as_vector(y, "y")
    _same_length(x, y, "sub")
    return _finite(x - y, "sub")


def scale(alpha: float, x) -> np.ndarray:
    return _finite(float(alpha) * as_vector(x, "x"), "scale")


def axpy(alpha: float, x, y) -> np.ndarray:
    """Return ``alpha * x + y``."""
    x, y = as_vector(x, "x"), as_vector(y, "y")
    _same_length(x, y, "axpy")
    return _finite(float(alpha) * x + y, "axpy")


def spectral_norm_estimate(
    A, max_iters: int = 10_000, tol: float = 1e-13, seed: int = POWER_ITERATION_SEED
) -> SpectralEstimate:
    """Largest singular value of a square matrix by power iteration on AᵀA.

    The start vector is drawn from a fixed seed. If ``A`` annihilates it, the
    iteration restarts once from a second seed before concluding the norm is 0.
    Iteration stops once the relative change of the estimate is at most
    ``tol``; ``converged`` is False if ``max_iters`` ran out first.
    """
    A = as_matrix(A, "A")
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"spectral_norm: matrix must be square, got {A.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    n = A.shape[0]
    if n == 0:
        return SpectralEstimate(0.0, 0, True)
    _finite(A, "spectral_norm input")

    for attempt in range(2):
        v = np.random.default_rng(seed + attempt).standard_normal(n)
        v /= np.linalg.norm(v)
        Av = A @ v
        sigma = float(np.linalg.norm(Av))
        if sigma > 0.0:
            break
    else:
        return SpectralEstimate(0.0, 0, True)

    for it in range(1, max_iters + 1):
        w = A.T @ Av
        w_norm = np.linalg.norm(w)
        if w_norm == 0.0:
            return SpectralEstimate(0.0, it, True)
        v = w / w_norm
        Av = A @ v
        new_sigma = float(np.linalg.norm(Av))
        if abs(new_sigma - sigma) <= tol * max(new_sigma, np.finfo(float).tiny):
            return SpectralEstimate(new_sigma, it, True)
        sigma = new_sigma
    return SpectralEstimate(sigma, max_iters, False)


def spectral_norm(A, max_iters: int = 10_000, tol: float = 1e-13) -> float:
    return spectral_norm_estimate(A, max_iters, tol).value


def frobenius_distance(A, B) -> float:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise DimensionError(f"frobenius_distance: shape mismatch {A.shape} vs {B.shape}")
    return float(np.sqrt(np.sum((A - B) ** 2)))
