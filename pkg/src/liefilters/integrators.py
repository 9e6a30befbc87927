"""Geometric time stepping: implicit Lie midpoint, implicit-Euler Riccati, RK4.

The Riccati step turns the implicit-Euler update of

    dP/dt = A P + P A^T - P B P + C        (B, C symmetric)

into an algebraic Riccati equation solved by Newton iteration with dense
Lyapunov inner solves; the step therefore inherits the positive-definiteness
preservation of order-one methods.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import solve_continuous_are, solve_continuous_lyapunov

from .lie import MotionState, prod_exp

SYMMETRY_TOL = 1e-10


class FixedPointDivergedError(RuntimeError):
    """Implicit midpoint fixed-point iteration failed to converge."""


class RiccatiSolveError(RuntimeError):
    """Implicit Riccati step failed to produce a positive-definite solution."""


def lie_midpoint_step(G: MotionState, rhs, delta: float,
                      tol: float = 1e-12, max_iter: int = 100) -> MotionState:
    """One implicit Lie midpoint step of dG/dt = G * mat(rhs(G)).

    ``rhs`` maps a group element to algebra coordinates in R^(6m).  The update
    is G * Exp(Xi) with Xi = delta * rhs(G * Exp(Xi / 2)), obtained by fixed
    point iteration started at Xi = delta * rhs(G).
    """
    order = G.order
    xi = delta * np.asarray(rhs(G), dtype=float)
    guard = 10.0 * np.linalg.norm(xi) + 1e-9
    for _ in range(max_iter):
        mid = G.compose(prod_exp(0.5 * xi, order))
        xi_new = delta * np.asarray(rhs(mid), dtype=float)
        step = np.linalg.norm(xi_new - xi)
        xi = xi_new
        if np.linalg.norm(xi) > guard:
            raise FixedPointDivergedError(
                f"midpoint increment grew beyond 10x its initial size ({np.linalg.norm(xi):.3e})"
            )
        if step < tol * max(1.0, np.linalg.norm(xi)):
            return G.compose(prod_exp(xi, order))
    raise FixedPointDivergedError(f"no convergence in {max_iter} iterations (last delta {step:.3e})")


def riccati_rhs_matrix(P, A, B, C) -> np.ndarray:
    """Right-hand side A P + P A^T - P B P + C of the Riccati flow."""
    return A @ P + P @ A.T - P @ B @ P + C


def _symmetrize(M):
    return 0.5 * (M + M.T)


def _newton_are(P0, A, B, C, delta, residual_tol, max_iter):
    """Solve P+ = P0 + delta * rhs(P+) as an algebraic Riccati equation.

    Rearranged:  At P+ + P+ At^T - P+ (delta B) P+ + (P0 + delta C) = 0
    with At = delta A - I/2.  Newton's method linearizes around the current
    iterate; each step is a Lyapunov solve with the closed-loop matrix.
    """
    n = P0.shape[0]
    At = delta * A - 0.5 * np.eye(n)
    D = delta * B
    M = P0 + delta * C
    # the residual floor scales with the data entering the solve
    scale = max(1.0, np.linalg.norm(M), np.linalg.norm(X0 := P0) ** 2 * np.linalg.norm(D))
    X = X0.copy()
    for _ in range(max_iter):
        closed = At - X @ D
        try:
            with warnings.catch_warnings():
                # non-Hurwitz closed loops surface as a scipy warning; the
                # residual check below decides whether the step is usable
                warnings.simplefilter("ignore")
                X = solve_continuous_lyapunov(closed, -(M + X @ D @ X))
        except Exception as exc:  # singular/defective Lyapunov input
            raise RiccatiSolveError(f"Lyapunov inner solve failed: {exc}") from exc
        X = _symmetrize(X)
        residual = np.linalg.norm(At @ X + X @ At.T - X @ D @ X + M)
        if residual < residual_tol * scale:
            if np.linalg.eigvalsh(X).min() <= 0:
                raise RiccatiSolveError("Riccati solution is not positive definite")
            return X
    raise RiccatiSolveError(
        f"Newton iteration stalled (residual {residual:.3e} after {max_iter} iterations)"
    )


def _direct_are(P0, A, B, C, delta):
    """Stabilizing ARE solution via the dense Hamiltonian solver.

    Robust when the Newton warm start is outside its convergence basin (large
    transients); the quadratic coefficient is factored so a singular B is
    acceptable.
    """
    n = P0.shape[0]
    At = delta * A - 0.5 * np.eye(n)
    D = _symmetrize(delta * B)
    M = _symmetrize(P0 + delta * C)
    w, V = np.linalg.eigh(D)
    keep = w > max(w.max(), 0.0) * 1e-14 + 1e-300
    if not np.any(keep):
        # linear case: a single Lyapunov solve is exact
        return _symmetrize(solve_continuous_lyapunov(At, -M))
    L = V[:, keep] * np.sqrt(w[keep])
    try:
        X = solve_continuous_are(At.T, L, M, np.eye(L.shape[1]))
    except Exception as exc:
        raise RiccatiSolveError(f"direct Riccati solve failed: {exc}") from exc
    X = _symmetrize(X)
    if np.linalg.eigvalsh(X).min() <= 0:
        raise RiccatiSolveError("direct Riccati solution is not positive definite")
    return X


def riccati_implicit_euler_step(P, A, B, C, delta: float,
                                residual_tol: float = 1e-10,
                                max_iter: int = 50) -> np.ndarray:
    """Advance the Riccati flow by one implicit-Euler step.

    Requires SPD ``P`` and symmetric ``B``, ``C``.  If the Newton solve fails,
    one explicit-Euler substep at delta/4 is taken (re-symmetrized) and the
    remainder retried; a second failure propagates.
    """
    if np.abs(B - B.T).max() > SYMMETRY_TOL or np.abs(C - C.T).max() > SYMMETRY_TOL:
        raise ValueError("Riccati coefficients B and C must be symmetric")

    def solve(P0, h):
        try:
            return _newton_are(P0, A, B, C, h, residual_tol, max_iter)
        except RiccatiSolveError:
            return _direct_are(P0, A, B, C, h)

    try:
        return solve(P, delta)
    except RiccatiSolveError:
        h = 0.25 * delta
        P_sub = _symmetrize(P + h * riccati_rhs_matrix(P, A, B, C))
        return solve(P_sub, delta - h)


def rk4_step(x, rhs, delta: float):
    """Classical fourth-order Runge-Kutta step on a flat array state."""
    k1 = rhs(x)
    k2 = rhs(x + 0.5 * delta * k1)
    k3 = rhs(x + 0.5 * delta * k2)
    k4 = rhs(x + delta * k3)
    return x + delta / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
