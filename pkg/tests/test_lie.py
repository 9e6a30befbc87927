import numpy as np
import pytest
from scipy.linalg import expm

from liefilters.lie import (
    CHRISTOFFEL,
    MotionState,
    PrincipalBranchError,
    SE3_BASIS,
    connection_matrix,
    connection_matrix_dual,
    geodesic_distance,
    prod_adjoint,
    prod_exp,
    prod_log,
    prod_mat,
    prod_vec,
    se3_adjoint,
    se3_exp,
    se3_inverse,
    se3_kron,
    se3_kron_t,
    se3_log,
    se3_mat,
    se3_project,
    se3_vec,
)

SQRT2 = np.sqrt(2.0)


def random_pose(rng, scale=1.0):
    return se3_exp(se3_mat(rng.normal(size=6) * scale))


class TestCoordinateMaps:
    def test_first_basis_vector_entries(self):
        M = se3_mat(np.eye(6)[0])
        assert M[2, 1] == pytest.approx(1 / SQRT2)
        assert M[1, 2] == pytest.approx(-1 / SQRT2)
        M2 = M.copy()
        M2[2, 1] = M2[1, 2] = 0.0
        assert np.abs(M2).max() == 0.0

    def test_translation_basis_vector(self):
        M = se3_mat(np.eye(6)[3])
        assert M[0, 3] == 1.0
        M[0, 3] = 0.0
        assert np.abs(M).max() == 0.0

    def test_zero(self):
        assert np.abs(se3_mat(np.zeros(6))).max() == 0.0

    def test_roundtrip(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.normal(size=6)
            assert np.abs(se3_vec(se3_mat(v)) - v).max() < 1e-14

    def test_metric_compatibility(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            v, w = rng.normal(size=6), rng.normal(size=6)
            assert abs(np.trace(se3_mat(v).T @ se3_mat(w)) - v @ w) < 1e-13

    def test_rejects_non_algebra_matrix(self):
        bad = np.eye(4)
        with pytest.raises(ValueError):
            se3_vec(bad)


class TestProjection:
    def test_fixes_algebra(self):
        rng = np.random.default_rng(2)
        xi = se3_mat(rng.normal(size=6))
        assert np.abs(se3_project(xi) - xi).max() < 1e-15

    def test_symmetric_input(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(4, 4))
        A = A + A.T
        P = se3_project(A)
        assert np.abs(P[:3, :3]).max() < 1e-14
        assert np.allclose(P[:3, 3], A[:3, 3])

    def test_identity_maps_to_zero(self):
        assert np.abs(se3_project(np.eye(4))).max() == 0.0

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            A = rng.normal(size=(4, 4))
            P = se3_project(A)
            assert np.abs(se3_project(P) - P).max() < 1e-14

    def test_orthogonal_projection(self):
        # inner products with algebra elements are preserved, so the
        # projection is orthogonal under the trace metric
        rng = np.random.default_rng(5)
        for _ in range(50):
            A = rng.normal(size=(4, 4))
            eta = se3_mat(rng.normal(size=6))
            assert abs(np.trace(A.T @ eta) - np.trace(se3_project(A).T @ eta)) < 1e-12


class TestExpLog:
    def test_zero_gives_identity(self):
        assert np.abs(se3_exp(np.zeros((4, 4))) - np.eye(4)).max() == 0.0

    def test_pure_translation_truncates(self):
        xi = se3_mat(np.array([0, 0, 0, 0.3, -0.7, 2.0]))
        assert np.abs(se3_exp(xi) - (np.eye(4) + xi)).max() < 1e-15

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(6)
        worst = 0.0
        for _ in range(100):
            xi = se3_mat(rng.normal(size=6))
            worst = max(worst, np.abs(se3_exp(xi) - expm(xi)).max())
        assert worst < 1e-10

    def test_output_on_manifold(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            E = se3_exp(se3_mat(rng.normal(size=6) * 2.0))
            R = E[:3, :3]
            assert np.abs(R.T @ R - np.eye(3)).max() < 1e-12
            assert np.allclose(E[3], [0, 0, 0, 1])

    def test_log_roundtrip(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            v = rng.normal(size=6)
            # rotation angle is norm(v[:3]) / sqrt(2); keep it below 3
            v[:3] *= 3.0 / max(np.linalg.norm(v[:3]) / SQRT2, 1e-9) * rng.uniform(0, 0.99)
            xi = se3_mat(v)
            assert np.abs(se3_log(se3_exp(xi)) - xi).max() < 1e-9

    def test_branch_error_near_pi(self):
        v = np.zeros(6)
        v[0] = np.pi * SQRT2  # rotation angle exactly pi
        with pytest.raises(PrincipalBranchError):
            se3_log(se3_exp(se3_mat(v)))

    def test_small_angle(self):
        xi = se3_mat(np.array([1e-9, -1e-9, 1e-10, 0.1, 0.2, 0.3]))
        assert np.abs(se3_log(se3_exp(xi)) - xi).max() < 1e-15


class TestProductGroup:
    def test_mat_vec_definition_order2(self):
        v = np.arange(12.0)
        xi, vel = prod_mat(v, 2)
        assert np.allclose(xi, se3_mat(v[:6]))
        assert np.allclose(vel, v[6:].reshape(1, 6))

    def test_roundtrip_random(self):
        rng = np.random.default_rng(9)
        for m in (1, 2, 3, 4):
            v = rng.normal(size=6 * m)
            assert np.abs(prod_vec(*prod_mat(v, m)) - v).max() < 1e-14

    def test_order1_reduces_to_se3(self):
        v = np.arange(6.0)
        xi, vel = prod_mat(v, 1)
        assert vel.size == 0
        assert np.allclose(xi, se3_mat(v))

    def test_exp_zero(self):
        G = prod_exp(np.zeros(18), 3)
        assert np.allclose(G.pose, np.eye(4))
        assert np.abs(G.vels).max() == 0.0

    def test_pure_velocity_tangent(self):
        v = np.zeros(12)
        v[6:] = np.arange(6)
        G = prod_exp(v, 2)
        assert np.allclose(G.pose, np.eye(4))
        assert np.allclose(G.vels[0], np.arange(6))

    def test_exp_log_roundtrip(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            v = rng.normal(size=12) * 0.5
            assert np.abs(prod_log(prod_exp(v, 2)) - v).max() < 1e-10

    def test_compose_and_inverse(self):
        rng = np.random.default_rng(11)
        G = prod_exp(rng.normal(size=12) * 0.4, 2)
        H = prod_exp(rng.normal(size=12) * 0.4, 2)
        GH = G.compose(H)
        assert np.allclose(GH.pose, G.pose @ H.pose)
        assert np.allclose(GH.vels, G.vels + H.vels)
        back = GH.compose(H.inverse())
        assert np.abs(back.pose - G.pose).max() < 1e-12
        Id = G.compose(G.inverse())
        assert np.abs(Id.pose - np.eye(4)).max() < 1e-12
        assert np.abs(Id.vels).max() < 1e-15

    def test_identity(self):
        G = MotionState.identity(3)
        assert G.order == 3
        assert np.allclose(G.pose, np.eye(4))


class TestAdjoint:
    def test_zero(self):
        assert np.abs(se3_adjoint(np.zeros(6))).max() == 0.0

    def test_commutator_identity(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            v, w = rng.normal(size=6), rng.normal(size=6)
            lhs = se3_adjoint(v) @ w
            comm = se3_mat(v) @ se3_mat(w) - se3_mat(w) @ se3_mat(v)
            assert np.abs(lhs - se3_vec(comm)).max() < 1e-13

    def test_pure_translation_blocks(self):
        A = se3_adjoint(np.eye(6)[3])
        assert np.abs(A[:3, :3]).max() == 0.0
        assert np.abs(A[3:, 3:]).max() == 0.0

    def test_product_embedding(self):
        rng = np.random.default_rng(13)
        v = rng.normal(size=18)
        A = prod_adjoint(v, 3)
        assert np.allclose(A[:6, :6], se3_adjoint(v[:6]))
        A[:6, :6] = 0.0
        assert np.abs(A).max() == 0.0

    def test_product_order1(self):
        v = np.arange(6.0)
        assert np.allclose(prod_adjoint(v, 1), se3_adjoint(v))


class TestKroneckerProducts:
    def test_identity_pair(self):
        assert np.abs(se3_kron(np.eye(4), np.eye(4)) - np.eye(6)).max() < 1e-14

    def test_conjugation_stays_in_algebra(self):
        # A eta A^-1 lies in the algebra for poses A, so the projection inside
        # the product is inert, giving a direct oracle
        rng = np.random.default_rng(14)
        for _ in range(100):
            A = random_pose(rng)
            B = se3_inverse(A)
            eta = se3_mat(rng.normal(size=6))
            lhs = se3_kron(A, B) @ se3_vec(eta)
            assert np.abs(lhs - se3_vec(A @ eta @ B)).max() < 1e-10

    def test_transpose_variant(self):
        rng = np.random.default_rng(15)
        eta = se3_mat(rng.normal(size=6))
        lhs = se3_kron_t(np.eye(4), np.eye(4)) @ se3_vec(eta)
        rhs = se3_vec(se3_project(eta.T), check=False)
        assert np.abs(lhs - rhs).max() < 1e-14


class TestConnection:
    def test_table_nonzeros(self):
        expected = {
            (3, 1, 2): 0.5, (1, 2, 3): 0.5, (2, 3, 1): 0.5,
            (2, 1, 3): -0.5, (3, 2, 1): -0.5, (1, 3, 2): -0.5,
            (6, 1, 5): 1.0, (4, 2, 6): 1.0, (5, 3, 4): 1.0,
            (5, 1, 6): -1.0, (6, 2, 4): -1.0, (4, 3, 5): -1.0,
        }
        nz = np.argwhere(CHRISTOFFEL != 0.0)
        assert len(nz) == 12
        for idx in nz:
            key = tuple(int(i) + 1 for i in idx)
            assert key in expected
            assert CHRISTOFFEL[tuple(idx)] == expected[key]

    def test_zero_argument(self):
        assert np.abs(connection_matrix(np.zeros(6))).max() == 0.0
        assert np.abs(connection_matrix_dual(np.zeros(6))).max() == 0.0

    def test_specific_entries(self):
        G1 = connection_matrix(np.eye(6)[0])  # contraction over k with z = e1
        # (i,j) entries fed by Gamma^i_{j1}: Gamma^2_{31} = 1/2
        assert G1[1, 2] == 0.5

    def test_double_contraction_identity(self):
        # both contractions express the same covariant derivative
        rng = np.random.default_rng(16)
        for _ in range(100):
            a, b = rng.normal(size=6), rng.normal(size=6)
            lhs = connection_matrix(b) @ a
            rhs = connection_matrix_dual(a) @ b
            assert np.abs(lhs - rhs).max() < 1e-13

    def test_torsion_free_in_table_basis(self):
        # the tabulated coefficients are torsion-free for the unit-skew
        # generators; in the sqrt(2)-scaled coordinates the bracket picks up
        # exactly that factor
        rng = np.random.default_rng(17)
        for _ in range(100):
            a, b = rng.normal(size=6), rng.normal(size=6)
            lhs = connection_matrix(b) @ a - connection_matrix(a) @ b
            comm = se3_mat(a) @ se3_mat(b) - se3_mat(b) @ se3_mat(a)
            assert np.abs(lhs - SQRT2 * se3_vec(comm)).max() < 1e-13

    def test_metric_compatible(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            a, b, c = (rng.normal(size=6) for _ in range(3))
            db = connection_matrix(b) @ a
            dc = connection_matrix(c) @ a
            assert abs(db @ c + b @ dc) < 1e-13

    def test_product_embedding(self):
        z = np.arange(12.0)
        M = connection_matrix(z)
        assert M.shape == (12, 12)
        assert np.allclose(M[:6, :6], connection_matrix(z[:6]))
        M[:6, :6] = 0.0
        assert np.abs(M).max() == 0.0


class TestGeodesicDistance:
    def test_self_distance(self):
        rng = np.random.default_rng(19)
        E = random_pose(rng)
        assert geodesic_distance(E, E) < 1e-12

    def test_symmetry(self):
        rng = np.random.default_rng(20)
        for _ in range(20):
            E1, E2 = random_pose(rng, 0.7), random_pose(rng, 0.7)
            assert geodesic_distance(E1, E2) == pytest.approx(
                geodesic_distance(E2, E1), abs=1e-10
            )

    def test_pure_translation(self):
        E = np.eye(4)
        E2 = np.eye(4)
        E2[:3, 3] = [1.0, 2.0, -2.0]
        assert geodesic_distance(E, E2) == pytest.approx(3.0, abs=1e-12)
