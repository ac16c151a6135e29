import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from helpers import kron_lyapunov
from sensoropt.densela import (LyapunovSolver, care_solve, expm, is_stable,
                               lyapunov_solve, random_spd, random_stable, sym_eig)
from sensoropt.errors import DimensionError, InputError, SolverError
from sensoropt.rng import stream


class TestIsStable:
    def test_scalar(self):
        assert is_stable([[-1.0]]) == (True, 1.0)

    def test_rotation_is_marginal(self):
        ok, margin = is_stable([[0.0, 1.0], [-1.0, 0.0]])
        assert not ok and margin == 0.0

    def test_shifted_gaussian(self):
        A = random_stable(5, -0.5, 3)
        ok, margin = is_stable(A)
        assert ok
        assert margin == pytest.approx(-np.max(scipy.linalg.eigvals(A).real), abs=1e-12)
        assert margin == pytest.approx(0.5, abs=1e-8)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            is_stable(np.ones((2, 3)))


class TestSymEig:
    def test_diagonal_permutation(self):
        w, V = sym_eig(np.diag([3.0, 1.0, 2.0]))
        assert np.array_equal(w, [3.0, 2.0, 1.0])
        assert np.array_equal(V, np.eye(3)[:, [0, 2, 1]])

    def test_identity_ties_in_index_order(self):
        w, V = sym_eig(np.eye(4))
        assert np.array_equal(w, np.ones(4)) and np.array_equal(V, np.eye(4))

    def test_reconstruction(self):
        G = stream(5).standard_normal((4, 4))
        S = G + G.T
        w, V = sym_eig(S)
        assert np.linalg.norm(S - V @ np.diag(w) @ V.T) < 1e-10
        assert np.all(np.diff(w) <= 0)

    def test_sign_convention(self):
        G = stream(6).standard_normal((5, 5))
        _, V = sym_eig(G + G.T)
        idx = np.argmax(np.abs(V), axis=0)
        assert np.all(V[idx, range(5)] >= 0)

    def test_asymmetric_rejected(self):
        with pytest.raises(InputError):
            sym_eig([[1.0, 2.0], [0.0, 1.0]])


class TestExpm:
    def test_planar_rotation(self):
        th = math.pi / 2
        R = expm([[0.0, th], [-th, 0.0]])
        assert np.max(np.abs(R - [[0.0, 1.0], [-1.0, 0.0]])) < 1e-12

    @given(st.integers(0, 2**32))
    def test_skew_gives_rotation(self, seed):
        G = stream(seed).standard_normal((5, 5))
        U = expm(G - G.T)
        assert np.linalg.norm(U.T @ U - np.eye(5)) < 1e-10
        assert abs(np.linalg.det(U) - 1.0) < 1e-8


class TestLyapunov:
    def test_scalar(self):
        assert lyapunov_solve([[-1.0]], [[6.0]])[0, 0] == pytest.approx(3.0, abs=1e-12)

    def test_commuting(self):
        Q = random_spd(4, stream(1))
        assert np.max(np.abs(lyapunov_solve(-np.eye(4), Q) - Q / 2)) < 1e-12

    def test_triangular_against_kronecker(self):
        F = np.array([[-1.0, 1.0], [0.0, -2.0]])
        X = lyapunov_solve(F, np.eye(2))
        assert np.max(np.abs(X - kron_lyapunov(F, np.eye(2)))) < 1e-12
        assert np.max(np.abs(X - [[7 / 12, 1 / 12], [1 / 12, 1 / 4]])) < 1e-12

    def test_unstable_names_eigenvalue(self):
        with pytest.raises(SolverError, match="eigenvalue"):
            lyapunov_solve([[0.5, 0.0], [0.0, -1.0]], np.eye(2))

    def test_residual_sweep(self):
        for k in range(100):
            rng = stream(11, k)
            n = int(rng.integers(1, 13))
            F = random_stable(n, -float(rng.uniform(0.05, 2.0)), 11, 1, k)
            P = random_spd(n, rng)
            X = lyapunov_solve(F, P)
            res = np.linalg.norm(F @ X + X @ F.T + P) / max(1.0, np.linalg.norm(P))
            assert res <= 1e-10
            if n <= 8:
                assert np.allclose(X, kron_lyapunov(F, P), rtol=1e-8, atol=1e-10)

    def test_solver_reuse(self):
        F = random_stable(4, -1.0, 2)
        solver = LyapunovSolver(F)
        for k in range(3):
            P = random_spd(4, stream(2, k))
            assert np.allclose(solver.solve(P), kron_lyapunov(F, P), atol=1e-10)


def _scalar_root(a, c, q, g):
    # positive root of g c k^2 - 2 a k - q = 0, rationalized so g c = 0 is safe
    return q / (-a + math.sqrt(a * a + g * c * q))


class TestRiccati:
    def test_scalar(self):
        assert care_solve([[-1.0]], [[1.0]], [[3.0]], 1.0).K[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_decoupled(self):
        K = care_solve(np.diag([-1.0, -2.0]), np.eye(2), np.diag([3.0, 8.0]), 1.0).K
        assert np.max(np.abs(K - np.diag([1.0, -2.0 + 2.0 * math.sqrt(3.0)]))) < 1e-10

    @given(st.floats(-3, -0.1), st.floats(0, 2), st.floats(0.1, 5), st.floats(0, 3),
           st.floats(-3, -0.1), st.floats(0, 2), st.floats(0.1, 5))
    def test_diagonal_brute_force(self, a1, c1, q1, g, a2, c2, q2):
        K = care_solve(np.diag([a1, a2]), np.diag([c1, c2]), np.diag([q1, q2]), g).K
        ref = np.diag([_scalar_root(a1, c1, q1, g), _scalar_root(a2, c2, q2, g)])
        assert np.max(np.abs(K - ref)) < 1e-10 * max(1.0, np.max(ref))

    def test_against_scipy_care(self):
        for k in range(10):
            n = 2 + k % 5
            A = random_stable(n, -0.3, 4, k)
            c = stream(4, 100 + k).standard_normal((2, n))
            Q = random_spd(n, stream(4, 200 + k))
            g = 0.7
            K = care_solve(A, c.T @ c, Q, g).K
            ref = scipy.linalg.solve_continuous_are(A, np.sqrt(g) * c.T, Q, np.eye(2))
            assert np.allclose(K, ref, rtol=1e-8, atol=1e-10)

    def test_gamma_zero_is_lyapunov(self):
        A = random_stable(4, -1.0, 8)
        Q = random_spd(4, stream(8))
        sol = care_solve(A, np.eye(4), Q, 0.0)
        assert np.allclose(sol.K, lyapunov_solve(A.T, Q), atol=1e-12)

    def test_postconditions(self):
        A = random_stable(5, -0.2, 9)
        Q = random_spd(5, stream(9))
        sol = care_solve(A, np.diag([1.0, 1.0, 0, 0, 0]), Q, 2.0)
        assert np.linalg.eigvalsh(sol.K)[0] > 0
        assert is_stable(sol.closed_loop)[0]
        assert sol.residual_norm <= 1e-10 * max(1.0, np.linalg.norm(Q))

    def test_warm_start_agrees(self):
        A = random_stable(4, -0.5, 10)
        C = np.diag([1.0, 0, 0, 0])
        K1 = care_solve(A, C, np.eye(4), 1.0).K
        K2 = care_solve(A, C, np.eye(4), 1.0, K0=K1 * 1.01).K
        assert np.allclose(K1, K2, atol=1e-12)

    def test_negative_gamma(self):
        with pytest.raises(InputError):
            care_solve([[-1.0]], [[1.0]], [[1.0]], -0.1)

    @given(st.integers(0, 10**6), st.floats(0, 2), st.floats(0, 2))
    def test_more_sensing_never_hurts(self, seed, g1, dg):
        A = random_stable(4, -0.5, seed)
        C = np.diag([1.0, 1.0, 0.0, 0.0])
        Q = random_spd(4, stream(seed, 1))
        t1 = np.trace(care_solve(A, C, Q, g1).K)
        t2 = np.trace(care_solve(A, C, Q, g1 + dg + 1e-3).K)
        assert t2 <= t1 * (1 + 1e-12)


class TestRandomStable:
    def test_scalar_forced(self):
        assert random_stable(1, -0.7, 123)[0, 0] == pytest.approx(-0.7, abs=1e-15)

    def test_margin(self):
        ok, margin = is_stable(random_stable(4, -3.0, 42))
        assert ok and margin == pytest.approx(3.0, abs=1e-8)

    def test_deterministic(self):
        assert np.array_equal(random_stable(5, -1, 7, 2), random_stable(5, -1, 7, 2))
        assert not np.array_equal(random_stable(5, -1, 7, 2), random_stable(5, -1, 7, 3))

    def test_positive_target_rejected(self):
        with pytest.raises(InputError):
            random_stable(3, 0.1, 0)
