"""Primitives for SE(3), its Lie algebra, and the product group SE(3) x R^(6(m-1)).

Conventions used throughout the package:

* Algebra matrices are 4x4 with a skew-symmetric rotation block and a free
  translation column; the bottom row is zero.
* The coordinate map ``se3_mat`` scales the skew basis by 1/sqrt(2) so that
  ``trace(se3_mat(v).T @ se3_mat(w)) == v @ w`` holds exactly.  The first three
  coordinates are rotational, the last three translational.
* The rotation angle of ``se3_mat(v)`` is ``norm(v[:3]) / sqrt(2)``.
* Product-group states of kinematic order ``m`` carry a pose plus ``m - 1``
  velocity vectors in R^6; their algebra is identified with R^(6m).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)

# Structure tolerance for matrices claimed to lie in the algebra.
ALGEBRA_TOL = 1e-9
# Safety margin away from the log branch cut at rotation angle pi.
BRANCH_MARGIN = 1e-6


class PrincipalBranchError(ValueError):
    """Logarithm requested for a rotation too close to angle pi."""


def skew(w: np.ndarray) -> np.ndarray:
    """Unscaled 3x3 skew matrix of a 3-vector."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def unskew(S: np.ndarray) -> np.ndarray:
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def se3_mat(v: np.ndarray) -> np.ndarray:
    """Map R^6 coordinates to a 4x4 algebra matrix (skew block scaled by 1/sqrt(2))."""
    v = np.asarray(v, dtype=float)
    out = np.zeros((4, 4))
    out[:3, :3] = skew(v[:3]) / SQRT2
    out[:3, 3] = v[3:6]
    return out


def se3_vec(xi: np.ndarray, check: bool = True) -> np.ndarray:
    """Inverse of ``se3_mat``.  Rejects matrices that are not in the algebra."""
    xi = np.asarray(xi, dtype=float)
    if check:
        rot = xi[:3, :3]
        if (
            np.abs(rot + rot.T).max() > ALGEBRA_TOL
            or np.abs(xi[3, :]).max() > ALGEBRA_TOL
        ):
            raise ValueError("matrix does not satisfy the se(3) structure")
    return np.array(
        [
            SQRT2 * xi[2, 1],
            SQRT2 * xi[0, 2],
            SQRT2 * xi[1, 0],
            xi[0, 3],
            xi[1, 3],
            xi[2, 3],
        ]
    )


_D_KEEP = np.diag([1.0, 1.0, 1.0, 0.0])
_D_SCALE = np.diag([1.0, 1.0, 1.0, 2.0])


def se3_project(A: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a 4x4 matrix onto the algebra.

    Equals 0.5 * diag(1,1,1,0) @ (A @ diag(1,1,1,2) - A.T @ diag(1,1,1,0)):
    the rotation block is replaced by its skew part, the translation column is
    kept, everything else is zeroed.
    """
    A = np.asarray(A, dtype=float)
    return 0.5 * _D_KEEP @ (A @ _D_SCALE - A.T @ _D_KEEP)


# Basis of the algebra in matrix form, se3_mat(e_1) ... se3_mat(e_6).
SE3_BASIS = [se3_mat(np.eye(6)[j]) for j in range(6)]


def _rot_coeffs(theta: float) -> tuple[float, float]:
    """Rodrigues coefficients (sin t / t, (1 - cos t) / t^2) with small-angle series."""
    if theta < 1e-6:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    return np.sin(theta) / theta, (1.0 - np.cos(theta)) / (theta * theta)


def se3_exp(xi: np.ndarray) -> np.ndarray:
    """Exponential map se(3) -> SE(3) via the Rodrigues closed form."""
    xi = np.asarray(xi, dtype=float)
    omega = unskew(xi[:3, :3])
    theta = np.linalg.norm(omega)
    Om = xi[:3, :3]
    a, b = _rot_coeffs(theta)
    R = np.eye(3) + a * Om + b * (Om @ Om)
    if theta < 1e-6:
        c = 1.0 / 6.0 - theta * theta / 120.0
    else:
        c = (theta - np.sin(theta)) / theta**3
    V = np.eye(3) + b * Om + c * (Om @ Om)
    E = np.eye(4)
    E[:3, :3] = R
    E[:3, 3] = V @ xi[:3, 3]
    return E


def se3_log(E: np.ndarray) -> np.ndarray:
    """Logarithm SE(3) -> se(3) on the principal branch.

    Raises ``PrincipalBranchError`` when the rotation angle is within
    ``BRANCH_MARGIN`` of pi.
    """
    E = np.asarray(E, dtype=float)
    R = E[:3, :3]
    cos_theta = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta >= np.pi - BRANCH_MARGIN:
        raise PrincipalBranchError(
            f"rotation angle {theta:.6f} is too close to pi for the principal log"
        )
    if theta < 1e-6:
        Om = 0.5 * (R - R.T)
        # second-order correction keeps the roundtrip tight near zero
        Om = Om * (1.0 + theta * theta / 6.0)
    else:
        Om = theta / (2.0 * np.sin(theta)) * (R - R.T)
    if theta < 1e-6:
        g = 1.0 / 12.0 + theta * theta / 720.0
    else:
        g = 1.0 / (theta * theta) - (1.0 + np.cos(theta)) / (
            2.0 * theta * np.sin(theta)
        )
    Vinv = np.eye(3) - 0.5 * Om + g * (Om @ Om)
    xi = np.zeros((4, 4))
    xi[:3, :3] = Om
    xi[:3, 3] = Vinv @ E[:3, 3]
    return xi


def se3_inverse(E: np.ndarray) -> np.ndarray:
    """Inverse of a pose matrix using the rotation-block transpose."""
    R = E[:3, :3]
    out = np.eye(4)
    out[:3, :3] = R.T
    out[:3, 3] = -R.T @ E[:3, 3]
    return out


def is_pose(E: np.ndarray, tol: float = 1e-9) -> bool:
    R = E[:3, :3]
    return (
        np.abs(R.T @ R - np.eye(3)).max() < tol
        and np.linalg.det(R) > 0
        and np.abs(E[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() < tol
    )


def se3_adjoint(v: np.ndarray) -> np.ndarray:
    """6x6 matrix of ad(se3_mat(v)) acting on coordinates.

    Satisfies se3_adjoint(v) @ se3_vec(eta) == se3_vec(commutator(se3_mat(v), eta)).
    """
    v = np.asarray(v, dtype=float)
    S = skew(v[:3]) / SQRT2
    T = skew(v[3:6]) / SQRT2
    out = np.zeros((6, 6))
    out[:3, :3] = S
    out[3:, :3] = T
    out[3:, 3:] = S
    return out


def se3_kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """6x6 matrix K with K @ se3_vec(eta) == se3_vec(project(A @ eta @ B)).

    Built column by column on the algebra basis; the projection makes the
    result well defined even when A @ eta @ B leaves the algebra.
    """
    cols = [se3_vec(se3_project(A @ Ej @ B), check=False) for Ej in SE3_BASIS]
    return np.column_stack(cols)


def se3_kron_t(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Transpose variant: K @ se3_vec(eta) == se3_vec(project(A @ eta.T @ B))."""
    cols = [se3_vec(se3_project(A @ Ej.T @ B), check=False) for Ej in SE3_BASIS]
    return np.column_stack(cols)


def christoffel_table() -> np.ndarray:
    """Dense 6x6x6 table G[i, j, k] of connection coefficients.

    Twelve entries are nonzero: +-1/2 on rotation-rotation index triples and
    +-1 on rotation-translation triples.
    """
    G = np.zeros((6, 6, 6))
    half = [(3, 1, 2), (1, 2, 3), (2, 3, 1)]
    for i, j, k in half:
        G[i - 1, j - 1, k - 1] = 0.5
    minus_half = [(2, 1, 3), (3, 2, 1), (1, 3, 2)]
    for i, j, k in minus_half:
        G[i - 1, j - 1, k - 1] = -0.5
    one = [(6, 1, 5), (4, 2, 6), (5, 3, 4)]
    for i, j, k in one:
        G[i - 1, j - 1, k - 1] = 1.0
    minus_one = [(5, 1, 6), (6, 2, 4), (4, 3, 5)]
    for i, j, k in minus_one:
        G[i - 1, j - 1, k - 1] = -1.0
    return G


CHRISTOFFEL = christoffel_table()


def connection_matrix(z: np.ndarray) -> np.ndarray:
    """Matrix of the connection contracted over its last index.

    out[i, j] = sum_k G[i, j, k] * z[k]; applied to coordinates eta it returns
    the coordinates of the covariant derivative of the constant field z along
    eta.  Input longer than 6 is embedded block-wise (flat velocity factors
    contribute zeros).
    """
    z = np.asarray(z, dtype=float)
    core = np.einsum("ijk,k->ij", CHRISTOFFEL, z[:6])
    if z.size == 6:
        return core
    out = np.zeros((z.size, z.size))
    out[:6, :6] = core
    return out


def connection_matrix_dual(z: np.ndarray) -> np.ndarray:
    """Dual contraction: out[i, j] = sum_k G[i, k, j] * z[k]."""
    z = np.asarray(z, dtype=float)
    core = np.einsum("ikj,k->ij", CHRISTOFFEL, z[:6])
    if z.size == 6:
        return core
    out = np.zeros((z.size, z.size))
    out[:6, :6] = core
    return out


def geodesic_distance(E1: np.ndarray, E2: np.ndarray) -> float:
    """Norm of the algebra coordinates of log(E1^-1 E2)."""
    rel = se3_inverse(E1) @ E2
    return float(np.linalg.norm(se3_vec(se3_log(rel), check=False)))


# ---------------------------------------------------------------------------
# Product group SE(3) x R^(6(m-1))
# ---------------------------------------------------------------------------


@dataclass
class MotionState:
    """Element of the order-m product group: pose plus m-1 velocity vectors.

    ``vels`` has shape (m - 1, 6); row i holds the coordinates of the i-th
    pose derivative (row 0 is the twist).
    """

    pose: np.ndarray
    vels: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))

    def __post_init__(self):
        self.pose = np.asarray(self.pose, dtype=float)
        self.vels = np.asarray(self.vels, dtype=float).reshape(-1, 6)

    @property
    def order(self) -> int:
        return self.vels.shape[0] + 1

    @classmethod
    def identity(cls, order: int) -> "MotionState":
        return cls(np.eye(4), np.zeros((order - 1, 6)))

    def compose(self, other: "MotionState") -> "MotionState":
        """Group product: poses multiply, velocity vectors add."""
        return MotionState(self.pose @ other.pose, self.vels + other.vels)

    def inverse(self) -> "MotionState":
        return MotionState(se3_inverse(self.pose), -self.vels)

    def copy(self) -> "MotionState":
        return MotionState(self.pose.copy(), self.vels.copy())


def prod_mat(v: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Algebra coordinates R^(6m) -> (4x4 matrix, (m-1, 6) velocity block)."""
    v = np.asarray(v, dtype=float)
    if v.size != 6 * order:
        raise ValueError(f"expected {6 * order} coordinates, got {v.size}")
    return se3_mat(v[:6]), v[6:].reshape(order - 1, 6)


def prod_vec(xi: np.ndarray, vel_part: np.ndarray) -> np.ndarray:
    """Inverse of ``prod_mat``: stack se3 coordinates and velocity rows."""
    return np.concatenate([se3_vec(xi), np.asarray(vel_part).ravel()])


def prod_exp(v: np.ndarray, order: int) -> MotionState:
    """Group exponential: Rodrigues on the pose factor, identity on the rest."""
    v = np.asarray(v, dtype=float)
    return MotionState(se3_exp(se3_mat(v[:6])), v[6:].reshape(order - 1, 6))


def prod_log(G: MotionState) -> np.ndarray:
    """Group logarithm as R^(6m) coordinates (principal branch on the pose)."""
    return np.concatenate([se3_vec(se3_log(G.pose), check=False), G.vels.ravel()])


def prod_adjoint(v: np.ndarray, order: int) -> np.ndarray:
    """6m x 6m adjoint matrix; only the pose block is nonzero."""
    v = np.asarray(v, dtype=float)
    out = np.zeros((6 * order, 6 * order))
    out[:6, :6] = se3_adjoint(v[:6])
    return out
