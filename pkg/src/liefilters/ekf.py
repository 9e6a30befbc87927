"""Continuous-discrete extended Kalman filter on the pose-velocity group.

Baseline for comparison against the minimum energy filter.  The state is the
order-2 product group element (pose, twist); the covariance propagation
includes the second-order adjoint correction terms of the underlying
Lie-group filter, evaluated in closed form for Gaussian process noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrators import lie_midpoint_step, rk4_step
from .lie import MotionState, prod_adjoint, prod_exp, se3_adjoint
from .mef import kinematic_drift
from .observation import (
    DegenerateDepthError,
    LinearObservation,
    ekf_jacobian_linear,
    ekf_jacobian_projective,
    project_point,
)

STATE_DIM = 12
COND_MAX = 1e12


class SingularInnovationError(RuntimeError):
    """Innovation covariance is numerically singular."""


@dataclass
class EkfConfig:
    """Process covariance s, measurement covariance q_l, inner step delta."""

    s: np.ndarray
    q_l: np.ndarray
    delta: float = 1.0 / 50.0
    _expect: tuple | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.q_l = np.asarray(self.q_l, dtype=float)
        if self.s.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("process covariance must be 12x12")

    def expectation_terms(self) -> tuple[np.ndarray, np.ndarray]:
        if self._expect is None:
            self._expect = expectation_terms(self.s)
        return self._expect


@dataclass
class EkfState:
    G: MotionState
    P: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls) -> "EkfState":
        return cls(MotionState.identity(2), np.eye(STATE_DIM), 0.0)

    def copy(self) -> "EkfState":
        return EkfState(self.G.copy(), self.P.copy(), self.t)


def process_jacobian(G: MotionState, S: np.ndarray) -> np.ndarray:
    """Linearization of the propagated error dynamics.

    Composed of the derivative-shift block, minus the adjoint of the drift,
    plus a noise-curvature term available in closed form for diagonal S only.
    """
    F = np.zeros((STATE_DIM, STATE_DIM))
    F[:6, 6:] = np.eye(6)
    adj = prod_adjoint(kinematic_drift(G), 2)
    return F - adj + noise_curvature(S) / 12.0


def noise_curvature(S: np.ndarray) -> np.ndarray:
    """Closed-form curvature correction for diagonal process covariance."""
    if np.abs(S - np.diag(np.diag(S))).max() > 0:
        raise ValueError("noise curvature is only available for diagonal covariance")
    d = np.diag(S)
    xi = -np.diag([d[1] + d[2], d[0] + d[2], d[0] + d[1]])
    out = np.zeros((STATE_DIM, STATE_DIM))
    out[:3, :3] = xi
    out[3:6, 3:6] = xi
    return out


def expectation_terms(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian closed forms of E[ad(e) S ad(e)^T] and E[ad(e)^2] for e ~ N(0, S).

    The adjoint is linear in its vector argument, so both reduce to double
    sums over basis adjoints weighted by covariance entries; only the pose
    block of the adjoint is nonzero.
    """
    ads = [prod_adjoint(np.eye(STATE_DIM)[i], 2) for i in range(6)]
    first = np.zeros((STATE_DIM, STATE_DIM))
    second = np.zeros((STATE_DIM, STATE_DIM))
    for i in range(6):
        for j in range(6):
            if S[i, j] == 0.0:
                continue
            first += S[i, j] * ads[i] @ S @ ads[j].T
            second += S[i, j] * ads[i] @ ads[j]
    return first, second


def covariance_rhs(P, J, S, first, second) -> np.ndarray:
    return (
        J @ P
        + P @ J.T
        + S
        + 0.25 * first
        + (second @ S + S @ second.T) / 12.0
    )


def pose_exp_jacobian(v: np.ndarray) -> np.ndarray:
    """Right Jacobian of the group exponential, as the alternating adjoint series.

    Terms are added until their norm drops below 1e-15; the series converges
    for rotation angles below pi.
    """
    A = se3_adjoint(v[:6])
    out = np.eye(6)
    term = np.eye(6)
    factorial = 1.0
    for n in range(1, 60):
        term = -term @ A
        factorial *= n + 1
        contrib = term / factorial
        out = out + contrib
        if np.linalg.norm(contrib) < 1e-15:
            break
    full = np.eye(STATE_DIM)
    full[:6, :6] = out
    return full


def ekf_propagate(state: EkfState, dt: float, config: EkfConfig) -> EkfState:
    """Integrate state and covariance over dt using inner steps of config.delta."""
    n_sub = max(1, int(np.ceil(dt / config.delta - 1e-12)))
    h = dt / n_sub
    first, second = config.expectation_terms()
    G = state.G
    P = state.P
    for _ in range(n_sub):
        J = process_jacobian(G, config.s)
        G = lie_midpoint_step(G, kinematic_drift, h)
        P = rk4_step(P, lambda M: covariance_rhs(M, J, config.s, first, second), h)
        P = 0.5 * (P + P.T)
    return EkfState(G, P, state.t + dt)


def _measurement(G: MotionState, observations):
    """Summed residual and Jacobian for a batch (linear or projective)."""
    E = G.pose
    residual = None
    for obs in observations:
        if isinstance(obs, LinearObservation):
            r = obs.y - E @ obs.a
        else:
            try:
                r = obs.y - project_point(E, obs.g)
            except DegenerateDepthError:
                continue
        residual = r if residual is None else residual + r
    if residual is None:
        raise ValueError("no usable observations in batch")
    if isinstance(observations[0], LinearObservation):
        H = ekf_jacobian_linear(E, [o.a for o in observations])
    else:
        H = ekf_jacobian_projective(E, observations)
    return residual, H


def ekf_update(state: EkfState, observations, config: EkfConfig) -> EkfState:
    """Measurement update: gain, exponential state correction, covariance twist."""
    residual, H = _measurement(state.G, observations)
    innovation = H @ state.P @ H.T + config.q_l
    if np.linalg.cond(innovation) > COND_MAX:
        raise SingularInnovationError(
            f"innovation covariance condition {np.linalg.cond(innovation):.3e}"
        )
    K = state.P @ H.T @ np.linalg.inv(innovation)
    m = K @ residual
    G_new = state.G.compose(prod_exp(m, 2))
    phi = pose_exp_jacobian(m)
    P_new = phi @ (np.eye(STATE_DIM) - K @ H) @ state.P @ phi.T
    P_new = 0.5 * (P_new + P_new.T)
    w, V = np.linalg.eigh(P_new)
    P_new = (V * np.clip(w, 0.0, None)) @ V.T
    return EkfState(G_new, P_new, state.t)


def ekf_run(initial: EkfState, stream, config: EkfConfig, frame_dt: float) -> list[EkfState]:
    """Propagate-update loop over per-frame observation batches."""
    states = [initial.copy()]
    for observations in stream:
        propagated = ekf_propagate(states[-1], frame_dt, config)
        states.append(ekf_update(propagated, observations, config))
    return states
