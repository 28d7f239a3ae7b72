"""Inexact Newton fixed-point iteration and related closed forms.

The solver drives ``f(z) = 0`` with the update ``z <- z + eta_k * f(z)``,
which is a Newton step whose linear system is replaced by a scaled identity.
Local linear convergence holds whenever ``||I + eta_k f'(z_k)||_2 < 1``;
:func:`check_contraction` measures that quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .linalg import DimensionError, NonFiniteError, as_matrix, as_vector, spectral_norm


@dataclass
class ResidualSystem:
    dimension: int
    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, z: np.ndarray) -> np.ndarray:
        out = np.asarray(self.residual(z), dtype=np.float64)
        if out.shape != (self.dimension,):
            raise DimensionError(
                f"residual returned shape {out.shape}, expected ({self.dimension},)"
            )
        return out


@dataclass
class SolveTrace:
    iterates: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    contraction_norms: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""

    @property
    def iterations_used(self) -> int:
        return len(self.iterates) - 1


def finite_difference_jacobian(sys: ResidualSystem, z) -> np.ndarray:
    """Central-difference Jacobian with step ``1e-6 * max(1, ||z||_inf)``."""
    z = as_vector(z, "z")
    h = 1e-6 * max(1.0, float(np.max(np.abs(z))) if z.size else 1.0)
    J = np.empty((sys.dimension, z.shape[0]))
    for j in range(z.shape[0]):
        zp = z.copy()
        zm = z.copy()
        zp[j] += h
        zm[j] -= h
        J[:, j] = (sys(zp) - sys(zm)) / (2.0 * h)
    if not np.all(np.isfinite(J)):
        raise NonFiniteError("finite-difference Jacobian has non-finite entries")
    return J


def _jacobian(sys: ResidualSystem, z: np.ndarray, allow_fd: bool = True) -> np.ndarray:
    if sys.jacobian is not None:
        J = as_matrix(sys.jacobian(z), "jacobian")
        if J.shape != (sys.dimension, sys.dimension):
            raise DimensionError(f"jacobian has shape {J.shape}")
        return J
    if not allow_fd:
        raise ValueError("no jacobian supplied and finite-difference fallback disabled")
    return finite_difference_jacobian(sys, z)


def check_contraction(sys: ResidualSystem, z, eta: float, allow_fd: bool = True) -> float:
    """Spectral norm of ``I + eta * f'(z)``; below 1 means locally contractive."""
    z = as_vector(z, "z")
    J = _jacobian(sys, z, allow_fd)
    return spectral_norm(np.eye(sys.dimension) + eta * J)


def inexact_newton_solve(
    sys: ResidualSystem,
    z0,
    etas: Union[float, Sequence[float]],
    max_iters: int = 100,
    tol: float = 1e-10,
    record_contraction: bool = False,
) -> tuple[np.ndarray, SolveTrace]:
    """Iterate ``z_{k+1} = z_k + eta_k f(z_k)`` until ``||f(z_k)||_2 <= tol``.

    Args:
        sys: residual map and optional Jacobian.
        z0: starting point.
        etas: a single step size, or one per iteration (at least ``max_iters``).
            Any sign is allowed.
        max_iters: maximum number of updates.
        tol: stopping threshold on the residual 2-norm.
        record_contraction: also record ``||I + eta_k f'(z_k)||_2`` for every
            update (costly; meant for diagnostics).

    Returns:
        The last iterate and its :class:`SolveTrace`. A non-finite residual
        ends the solve with ``converged=False``; it does not raise.
    """
    z = as_vector(z0, "z0").copy()
    if z.shape[0] != sys.dimension:
        raise DimensionError(f"z0 has length {z.shape[0]}, system has {sys.dimension}")
    if np.ndim(etas) == 0:
        schedule = [float(etas)] * max_iters
    else:
        schedule = [float(e) for e in etas]
        if len(schedule) < max_iters:
            raise ValueError(
                f"need at least {max_iters} step sizes, got {len(schedule)}"
            )

    trace = SolveTrace()
    for k in range(max_iters + 1):
        r = sys(z)
        r_norm = float(np.linalg.norm(r))
        trace.iterates.append(z.copy())
        trace.residual_norms.append(r_norm)
        if not math.isfinite(r_norm):
            trace.reason = f"diverged: non-finite residual at iteration {k}"
            return z, trace
        if r_norm <= tol:
            trace.converged = True
            trace.reason = "residual below tolerance"
            return z, trace
        if k == max_iters:
            break
        eta = schedule[k]
        if record_contraction:
            trace.contraction_norms.append(check_contraction(sys, z, eta))
        z = z + eta * r
    trace.reason = "max_iters reached"
    return z, trace


def phi_scalar(alpha: float, tol: float = 1e-12) -> float:
    """Solve ``h = tanh(h + alpha)`` for ``h`` by bisection.

    ``g(h) = h - tanh(h + alpha)`` is nondecreasing, so the root is unique.
    The bracket ``[min(0, tanh a) - 1, max(0, tanh a) + 1]`` always contains it.
    One final ``tanh`` application (a contraction near the root) keeps the
    result inside ``[-1, 1]`` where ``tanh`` rounds to +-1.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    alpha = float(alpha)
    if alpha == 0.0:
        return 0.0
    t = math.tanh(alpha)
    lo = min(0.0, t) - 1.0
    hi = max(0.0, t) + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        g = mid - math.tanh(mid + alpha)
        if g == 0.0:
            return mid
        if g < 0.0:
            lo = mid
        else:
            hi = mid
    return math.tanh(0.5 * (lo + hi) + alpha)


def phi_derivative(alpha: float, tol: float = 1e-12) -> float:
    """Implicit derivative ``dh/dalpha`` of ``h = tanh(h + alpha)``.

    Equal to ``s / (1 - s)`` with ``s = sech^2(h + alpha)``, evaluated as
    ``1 / sinh^2(h + alpha)`` to avoid cancellation near ``alpha = 0``.
    """
    if alpha == 0:
        raise ValueError("phi_derivative is unbounded at alpha = 0")
    u = phi_scalar(alpha, tol) + alpha
    return 1.0 / math.sinh(u) ** 2


def _affine_rhs(V, W, b, h_prev, x) -> np.ndarray:
    V = as_matrix(V, "V")
    W = as_matrix(W, "W")
    b = as_vector(b, "b")
    h_prev = as_vector(h_prev, "h_prev")
    x = as_vector(x, "x")
    n = b.shape[0]
    if V.shape != (n, n) or h_prev.shape[0] != n:
        raise DimensionError(f"V {V.shape} / h_prev {h_prev.shape} do not match n={n}")
    if W.shape != (n, x.shape[0]):
        raise DimensionError(f"W {W.shape} does not match n={n}, d={x.shape[0]}")
    return V @ h_prev + W @ x + b


def solve_dense(A, rhs, pivot_tol: float = 1e-12) -> np.ndarray:
    """Gaussian elimination with partial pivoting.

    Raises ``np.linalg.LinAlgError`` naming the column whose best pivot has
    magnitude below ``pivot_tol``.
    """
    M = as_matrix(A, "A").copy()
    y = as_vector(rhs, "rhs").copy()
    n = M.shape[0]
    if M.shape != (n, n) or y.shape[0] != n:
        raise DimensionError(f"solve_dense: A {M.shape} vs rhs {y.shape}")
    for col in range(n):
        p = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[p, col]) < pivot_tol:
            raise np.linalg.LinAlgError(
                f"singular system: pivot {col} has magnitude {abs(M[p, col]):.3e}"
            )
        if p != col:
            M[[col, p]] = M[[p, col]]
            y[[col, p]] = y[[p, col]]
        factors = M[col + 1 :, col] / M[col, col]
        M[col + 1 :, col:] -= np.outer(factors, M[col, col:])
        y[col + 1 :] -= factors * y[col]
    z = np.empty(n)
    for i in range(n - 1, -1, -1):
        z[i] = (y[i] - M[i, i + 1 :] @ z[i + 1 :]) / M[i, i]
    return z


def linear_fixed_point_exact(U, V, W, b, h_prev, x) -> np.ndarray:
    """Exact solution of ``z = U z + V h_prev + W x + b`` by a dense solve."""
    U = as_matrix(U, "U")
    rhs = _affine_rhs(V, W, b, h_prev, x)
    if U.shape != (rhs.shape[0],) * 2:
        raise DimensionError(f"U has shape {U.shape}, expected {(rhs.shape[0],) * 2}")
    return solve_dense(np.eye(U.shape[0]) - U, rhs)


def linear_fixed_point_approx(U, V, W, b, h_prev, x) -> np.ndarray:
    """First-order Neumann approximation ``(I + U)(V h_prev + W x + b)``."""
    U = as_matrix(U, "U")
    rhs = _affine_rhs(V, W, b, h_prev, x)
    if U.shape != (rhs.shape[0],) * 2:
        raise DimensionError(f"U has shape {U.shape}, expected {(rhs.shape[0],) * 2}")
    return rhs + U @ rhs


def phi_curve(lo: float = -3.0, hi: float = 3.0, points: int = 601, tol: float = 1e-12):
    """Rows ``(alpha, phi, dphi)`` over an evenly spaced grid.

    Grid points are computed as ``(lo*(N-1-i) + hi*i)/(N-1)`` so that values
    like 0 and 1 land exactly. ``dphi`` is None at ``alpha == 0``.
    """
    if points < 2:
        raise ValueError("points must be >= 2")
    rows = []
    m = points - 1
    for i in range(points):
        a = (lo * (m - i) + hi * i) / m
        d = None if a == 0.0 else phi_derivative(a, tol)
        rows.append((a, phi_scalar(a, tol), d))
    return rows
