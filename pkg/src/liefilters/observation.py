"""Observation models relating camera motion to image measurements.

Two measurement families are supported:

* projective: a tracked scene point with known depth induces a 2D measurement
  through the pinhole projection of the relatively moved camera (normalized
  image coordinates, unit focal length);
* linear: the pose matrix acts on a fixed direction vector in R^4.

For each family this module provides the measurement function, its gradient
factor (a 4x4 matrix whose algebra projection is the left-trivialized cost
gradient), the directional derivative of that factor, and the stacked
second-order matrix used in the filter's Riccati equation, plus the
measurement Jacobians needed by the Kalman baseline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lie import SE3_BASIS, se3_project, se3_vec

log = logging.getLogger(__name__)

# Points whose third camera coordinate falls below this are treated as lying
# on the principal plane; the projection is undefined there.
KAPPA_MIN = 1e-9

_IHAT = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
_E3 = np.array([0.0, 0.0, 1.0, 0.0])


class DegenerateDepthError(ValueError):
    """Observed point projects onto the camera principal plane."""


@dataclass
class Observation:
    """Projective measurement of one scene point.

    pixel: normalized image coordinates of the point in the reference frame.
    depth: third camera coordinate of the point there (> 0).
    y: measured location after the relative motion (flow plus pixel).
    g: homogeneous data vector (depth * pixel, depth, 1).
    """

    pixel: np.ndarray
    depth: float
    y: np.ndarray
    g: np.ndarray

    @classmethod
    def from_measurement(cls, pixel, depth, y) -> "Observation":
        pixel = np.asarray(pixel, dtype=float)
        if depth <= 0:
            raise ValueError(f"depth must be positive, got {depth}")
        g = np.array([depth * pixel[0], depth * pixel[1], depth, 1.0])
        return cls(pixel=pixel, depth=float(depth), y=np.asarray(y, dtype=float), g=g)


@dataclass
class LinearObservation:
    """Linear measurement y = E @ a (+ noise) of the pose matrix."""

    a: np.ndarray
    y: np.ndarray


def _body_point(E_inv: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, float]:
    b = E_inv @ g
    kappa = b[2]
    if abs(kappa) <= KAPPA_MIN:
        raise DegenerateDepthError(f"projective depth {kappa:.3e} below threshold")
    return b, kappa


def project_point(E: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Predicted measurement: pinhole projection of E^-1 g."""
    b, kappa = _body_point(np.linalg.inv(E), g)
    return b[:2] / kappa


def project_point_diff(E: np.ndarray, g: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Directional derivative of ``project_point`` along the ambient direction xi."""
    E_inv = np.linalg.inv(E)
    b, kappa = _body_point(E_inv, g)
    w = E_inv @ xi @ E_inv @ g
    return w[2] * b[:2] / kappa**2 - w[:2] / kappa


def residual_vec(obs: Observation, E: np.ndarray) -> np.ndarray:
    return obs.y - project_point(E, obs.g)


def residual_cost(obs: Observation, E: np.ndarray, Q: np.ndarray) -> float:
    r = residual_vec(obs, E)
    return 0.5 * float(r @ Q @ r)


def _grad_factor(E_inv, g, y, Q):
    """Shared pieces of the gradient matrix and its derivative."""
    b, kappa = _body_point(E_inv, g)
    W = _IHAT / kappa - np.outer(b[:2], _E3) / kappa**2
    r = y - b[:2] / kappa
    return b, kappa, W, r


def grad_matrix(E: np.ndarray, g: np.ndarray, y: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """4x4 gradient factor of the weighted projective residual.

    Its algebra projection gives the left-trivialized gradient of
    0.5 * ||y - project_point(E, g)||_Q^2 at E.
    """
    b, _, W, r = _grad_factor(np.linalg.inv(E), g, y, Q)
    return np.outer(W.T @ (Q @ r), b)


def grad_diff_vec(E, g, y, Q, eta: np.ndarray) -> np.ndarray:
    """Coordinates of the projected derivative of ``grad_matrix`` along eta.

    eta is an ambient 4x4 perturbation of E; the derivative follows the
    product rule over the three E-dependent factors of the gradient matrix.
    """
    E_inv = np.linalg.inv(E)
    b, kappa, W, r = _grad_factor(E_inv, g, y, Q)
    w = E_inv @ eta @ E_inv @ g
    s = w[2]
    dW = (
        s / kappa**2 * _IHAT
        - 2.0 * s / kappa**3 * np.outer(b[:2], _E3)
        + np.outer(w[:2], _E3) / kappa**2
    )
    dh = s * b[:2] / kappa**2 - w[:2] / kappa
    dA = (
        np.outer(dW.T @ (Q @ r), b)
        - np.outer(W.T @ (Q @ dh), b)
        - np.outer(W.T @ (Q @ r), w)
    )
    return se3_vec(se3_project(dA), check=False)


def hess_matrix(E, g, y, Q) -> np.ndarray:
    """6x6 second-order matrix: column j is grad_diff_vec along the j-th basis."""
    return np.column_stack([grad_diff_vec(E, g, y, Q, Ej) for Ej in SE3_BASIS])


# ---------------------------------------------------------------------------
# Linear observation model
# ---------------------------------------------------------------------------


def grad_matrix_linear(E, a, y, Q) -> np.ndarray:
    """Gradient factor of 0.5 * ||E a - y||_Q^2; projection gives the gradient."""
    return np.outer(E.T @ (Q @ (E @ a - y)), a)


def grad_diff_vec_linear(E, a, y, Q, eta) -> np.ndarray:
    dA = np.outer(eta.T @ (Q @ (E @ a - y)), a) + np.outer(E.T @ (Q @ (eta @ a)), a)
    return se3_vec(se3_project(dA), check=False)


def hess_matrix_linear(E, a, y, Q) -> np.ndarray:
    return np.column_stack([grad_diff_vec_linear(E, a, y, Q, Ej) for Ej in SE3_BASIS])


# ---------------------------------------------------------------------------
# Batch helpers
# ---------------------------------------------------------------------------


def sum_grad_projection(E, observations, Q) -> np.ndarray:
    """Sum of projected gradient factors over a batch; degenerate points are
    dropped (and logged) rather than zero-filled."""
    total = np.zeros((4, 4))
    for k, obs in enumerate(observations):
        try:
            if isinstance(obs, LinearObservation):
                total += se3_project(grad_matrix_linear(E, obs.a, obs.y, Q))
            else:
                total += se3_project(grad_matrix(E, obs.g, obs.y, Q))
        except DegenerateDepthError:
            log.warning("dropping degenerate observation %d", k)
    return total


def sum_hessian(E, observations, Q, with_connection) -> np.ndarray:
    """Sum over the batch of (connection correction + second-order matrix).

    ``with_connection`` maps the projected-gradient coordinates of one
    observation to its 6x6 connection term (pass a zero map to disable).
    """
    total = np.zeros((6, 6))
    for k, obs in enumerate(observations):
        try:
            if isinstance(obs, LinearObservation):
                pr_a = se3_vec(se3_project(grad_matrix_linear(E, obs.a, obs.y, Q)), check=False)
                total += with_connection(pr_a) + hess_matrix_linear(E, obs.a, obs.y, Q)
            else:
                pr_a = se3_vec(se3_project(grad_matrix(E, obs.g, obs.y, Q)), check=False)
                total += with_connection(pr_a) + hess_matrix(E, obs.g, obs.y, Q)
        except DegenerateDepthError:
            log.warning("dropping degenerate observation %d", k)
    return total


# ---------------------------------------------------------------------------
# Measurement Jacobians for the Kalman baseline (left-translated directions)
# ---------------------------------------------------------------------------


def ekf_jacobian_projective(E: np.ndarray, observations) -> np.ndarray:
    """2x12 Jacobian of the summed projective measurement at G = (E, v).

    Velocity columns are exactly zero since the measurement depends on the
    pose factor only.
    """
    H = np.zeros((2, 12))
    E_inv = np.linalg.inv(E)
    for k, obs in enumerate(observations):
        try:
            b, kappa = _body_point(E_inv, obs.g)
        except DegenerateDepthError:
            log.warning("dropping degenerate observation %d", k)
            continue
        for j in range(2):
            ej = np.zeros(4)
            ej[j] = 1.0
            rho = (b[j] / kappa**2 * np.outer(b, _E3) - np.outer(b, ej) / kappa).T
            H[j, :6] += se3_vec(se3_project(rho), check=False)
    return H


def ekf_jacobian_linear(E: np.ndarray, directions) -> np.ndarray:
    """4x12 Jacobian of the summed linear measurement y = E a."""
    H = np.zeros((4, 12))
    for a in directions:
        for i in range(4):
            ei = np.zeros(4)
            ei[i] = 1.0
            H[i, :6] += se3_vec(se3_project(E.T @ np.outer(ei, a)), check=False)
    return H
