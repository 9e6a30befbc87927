import numpy as np
import pytest
from scipy.linalg import expm, solve_sylvester

from liefilters.integrators import (
    FixedPointDivergedError,
    lie_midpoint_step,
    riccati_implicit_euler_step,
    riccati_rhs_matrix,
    rk4_step,
)
from liefilters.lie import (
    MotionState,
    prod_exp,
    prod_log,
    se3_exp,
    se3_inverse,
    se3_mat,
    se3_vec,
)


class TestLieMidpoint:
    def test_zero_rhs(self):
        G = prod_exp(np.arange(12.0) * 0.05, 2)
        out = lie_midpoint_step(G, lambda _: np.zeros(12), 0.1)
        assert np.abs(out.pose - G.pose).max() < 1e-15
        assert np.allclose(out.vels, G.vels)

    def test_constant_rhs_is_exact(self):
        rng = np.random.default_rng(0)
        G = MotionState.identity(2)
        c = rng.normal(size=12) * 0.5
        out = lie_midpoint_step(G, lambda _: c, 0.2)
        expected = G.compose(prod_exp(0.2 * c, 2))
        assert np.abs(out.pose - expected.pose).max() < 1e-14
        assert np.allclose(out.vels, expected.vels)

    def test_second_order_convergence(self):
        # flow dG/dt = mat(c) G has closed form Exp(t c) G0; its
        # left-trivialized right-hand side genuinely depends on G
        rng = np.random.default_rng(1)
        c = rng.normal(size=6) * 0.8
        G0 = MotionState(se3_exp(se3_mat(rng.normal(size=6) * 0.3)))

        def rhs(G):
            return se3_vec(se3_inverse(G.pose) @ se3_mat(c) @ G.pose, check=False)

        T = 0.8
        exact = se3_exp(T * se3_mat(c)) @ G0.pose

        def err(n_steps):
            G = G0.copy()
            for _ in range(n_steps):
                G = lie_midpoint_step(G, rhs, T / n_steps)
            return np.abs(G.pose - exact).max()

        e1, e2, e3 = err(8), err(16), err(32)
        order12 = np.log2(e1 / e2)
        order23 = np.log2(e2 / e3)
        assert 1.8 <= order12 <= 2.2
        assert 1.8 <= order23 <= 2.2

    def test_output_on_manifold(self):
        rng = np.random.default_rng(2)
        G = MotionState(se3_exp(se3_mat(rng.normal(size=6))))
        out = lie_midpoint_step(G, lambda g: rng.normal(size=6), 0.05)
        R = out.pose[:3, :3]
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-12
        assert np.allclose(out.pose[3], [0, 0, 0, 1])

    def test_divergence_detected(self):
        # repelling rhs with step far beyond the contraction region
        G = prod_exp(np.full(12, 0.1), 2)
        with pytest.raises(FixedPointDivergedError):
            lie_midpoint_step(G, lambda g: 1e4 * prod_log(g), 1.0)


class TestRiccatiStep:
    def test_trivial_coefficients(self):
        rng = np.random.default_rng(3)
        root = rng.normal(size=(4, 4))
        P = root @ root.T + np.eye(4)
        Z = np.zeros((4, 4))
        out = riccati_implicit_euler_step(P, Z, Z, Z, 0.1)
        assert np.abs(out - P).max() < 1e-12

    def test_scalar_quadratic_oracle(self):
        # the 1x1 problem has a closed-form positive root
        rng = np.random.default_rng(4)
        for _ in range(20):
            p0 = rng.uniform(0.5, 3.0)
            a = rng.normal() * 0.5
            b = rng.uniform(0.1, 2.0)
            c = rng.uniform(0.0, 2.0)
            delta = 0.05
            at = delta * a - 0.5
            m = p0 + delta * c
            root = (at + np.sqrt(at * at + delta * b * m)) / (delta * b)
            out = riccati_implicit_euler_step(
                np.array([[p0]]), np.array([[a]]), np.array([[b]]), np.array([[c]]), delta
            )
            assert abs(out[0, 0] - root) < 1e-12

    def test_small_step_consistency(self):
        rng = np.random.default_rng(5)
        n = 6
        root = rng.normal(size=(n, n))
        P = root @ root.T + np.eye(n)
        A = rng.normal(size=(n, n)) * 0.3
        broot = rng.normal(size=(n, n)) * 0.3
        B = broot @ broot.T
        C = np.eye(n) * 0.5
        for delta in (1e-3, 1e-4):
            out = riccati_implicit_euler_step(P, A, B, C, delta)
            slope = (out - P) / delta
            target = riccati_rhs_matrix(P, A, B, C)
            assert np.abs(slope - target).max() < 10.0 * delta * np.abs(target).max()

    def test_preserves_positive_definiteness(self):
        rng = np.random.default_rng(6)
        n = 12
        for _ in range(100):
            root = rng.normal(size=(n, n))
            P = root @ root.T + 0.1 * np.eye(n)
            A = rng.normal(size=(n, n)) * 0.5
            broot = rng.normal(size=(n, n)) * 0.5
            B = broot @ broot.T
            croot = rng.normal(size=(n, n)) * 0.3
            C = croot @ croot.T
            out = riccati_implicit_euler_step(P, A, B, C, 0.02)
            assert np.abs(out - out.T).max() < 1e-10
            assert np.linalg.eigvalsh(out).min() > 0

    def test_rejects_asymmetric_coefficients(self):
        P = np.eye(3)
        bad = np.array([[0.0, 1.0, 0], [0, 0, 0], [0, 0, 0]])
        with pytest.raises(ValueError):
            riccati_implicit_euler_step(P, np.zeros((3, 3)), bad, np.zeros((3, 3)), 0.1)

    def test_linear_case_matches_sylvester(self):
        # with B = 0 the implicit step is a single linear solve
        rng = np.random.default_rng(7)
        n = 6
        root = rng.normal(size=(n, n))
        P = root @ root.T + np.eye(n)
        A = rng.normal(size=(n, n)) * 0.4
        Z = np.zeros((n, n))
        delta = 0.05
        out = riccati_implicit_euler_step(P, A, Z, Z, delta)
        expected = solve_sylvester(np.eye(n) - delta * A, -delta * A.T, P)
        assert np.abs(out - expected).max() < 1e-9

    def test_linear_flow_matches_exponential(self):
        # dP/dt = A P + P A^T over a few tiny steps stays close to the closed
        # form e^{tA} P0 e^{tA^T}; the step is first order in delta
        rng = np.random.default_rng(8)
        n = 5
        root = rng.normal(size=(n, n))
        P0 = root @ root.T + np.eye(n)
        A = rng.normal(size=(n, n)) * 0.5
        Z = np.zeros((n, n))
        delta = 1e-3
        P = P0.copy()
        for _ in range(3):
            P = riccati_implicit_euler_step(P, A, Z, Z, delta)
        t = 3 * delta
        closed = expm(t * A) @ P0 @ expm(t * A).T
        assert np.abs(P - closed).max() < 1e-4


class TestRk4:
    def test_zero_rhs(self):
        x = np.arange(5.0)
        assert np.allclose(rk4_step(x, lambda _: np.zeros(5), 0.3), x)

    def test_scalar_exponential_order(self):
        lam = -1.3
        x = np.array([2.0])
        for delta in (0.1, 0.05):
            out = rk4_step(x, lambda v: lam * v, delta)
            exact = x * np.exp(lam * delta)
            assert abs(out[0] - exact[0]) < 2.0 * abs(lam * delta) ** 5 * x[0]

    def test_matrix_ode_vs_exponential(self):
        rng = np.random.default_rng(9)
        A = rng.normal(size=(4, 4)) * 0.5
        X0 = np.eye(4)
        delta = 0.01
        out = rk4_step(X0, lambda X: A @ X, delta)
        assert np.abs(out - expm(delta * A)).max() < 1e-10
