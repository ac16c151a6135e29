import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import make_problem
from sensoropt.errors import DegeneracyError
from sensoropt.extremal import (census_prediction, continue_all, continue_extremal,
                                count_partitions_P, count_partitions_Q,
                                enumerate_extremals_gamma0, gamma_star,
                                predicted_signature, signature_census,
                                signature_formula, signature_numeric)
from sensoropt.flow import flow_run
from sensoropt.isospectral import Projector, principal_angles, random_projector, retract, tangent_basis
from sensoropt.objective import SensorProblem, cost_J, evaluate


def _distinct_partitions(p, m, max_part=None):
    top = m if max_part is None else min(m, max_part)
    return sum(1 for s in itertools.combinations(range(1, top + 1), p) if sum(s) == m)


def _fd_hessian(pr, C, h=1e-3):
    """Finite-difference Hessian in the orthonormal tangent coordinates."""
    basis = [b.omega for b in tangent_basis(C)]
    d = len(basis)
    J0 = cost_J(pr, C)
    H = np.zeros((d, d))
    for a in range(d):
        for b in range(a, d):
            def f(s, t):
                return cost_J(pr, retract(C, s * basis[a] + t * basis[b], 1.0))
            if a == b:
                H[a, a] = (f(h, 0) - 2 * J0 + f(-h, 0)) / h**2
            else:
                H[a, b] = H[b, a] = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)
    return H


class TestEnumeration:
    @pytest.mark.parametrize("n,p,count", [(3, 1, 3), (7, 4, 35)])
    def test_counts(self, n, p, count):
        pr = make_problem(n, n, p, 0.0)
        recs = enumerate_extremals_gamma0(pr.A, pr.Q, pr.L, p)
        assert len(recs) == count
        assert [r.index_set for r in recs] == [tuple(i + 1 for i in s)
                                               for s in itertools.combinations(range(n), p)]

    def test_diagonal_coordinate_projectors(self):
        A = np.diag([-1.0, -2.0, -3.0])
        recs = enumerate_extremals_gamma0(A, np.eye(3), np.eye(3), 2)
        for r in recs:
            d = np.zeros(3)
            d[[i - 1 for i in r.index_set]] = 1
            assert np.allclose(r.C.C, np.diag(d), atol=1e-14)

    def test_degenerate_m0(self):
        with pytest.raises(DegeneracyError, match="resample"):
            enumerate_extremals_gamma0(-np.eye(3), np.eye(3), np.eye(3), 1)


class TestContinuation:
    def test_gamma0_identity(self):
        pr = make_problem(2, 4, 2, 0.0)
        r = enumerate_extremals_gamma0(pr.A, pr.Q, pr.L, 2)[3]
        out = continue_extremal(pr, r)
        assert np.array_equal(out.C.C, r.C.C)

    def test_scalar(self):
        pr = SensorProblem([[-2.0]], [[1.0]], [[1.0]], 3.0, 1)
        (r,) = continue_all(pr)
        assert np.array_equal(r.C.C, [[1.0]]) and r.signature == (0, 0, 0)

    def test_residuals_and_flow_agreement(self):
        pr = make_problem(12, 4, 1, 0.1)
        recs = continue_all(pr)
        for r in recs:
            assert evaluate(pr, r.C).bracket_norm < 1e-9
        for s in range(5):
            tr = flow_run(pr, random_projector(4, 1, 12, s))
            assert tr.converged
            assert min(np.max(principal_angles(tr.final_C, r.C)) for r in recs) < 1e-4


class TestSignatures:
    def test_top_is_definite(self):
        pr = make_problem(3, 5, 1, 0.05)
        recs = continue_all(pr)
        assert recs[0].signature == (4, 0, 0)

    def test_trivial_tangent(self):
        pr = make_problem(3, 3, 3, 0.2)
        (r,) = continue_all(pr)
        assert signature_numeric(pr, r.C) == (0, 0, 0)

    def test_n3_against_brute_force(self):
        pr = make_problem(21, 3, 1, 0.05)
        for j, r in enumerate(continue_all(pr), 1):
            H = _fd_hessian(pr, r.C)
            w = np.linalg.eigvalsh(H)
            brute = (int(np.sum(w > 0)), int(np.sum(w < 0)))
            assert tuple(sorted(brute)) == tuple(sorted((3 - j, j - 1)))
            assert (r.signature.n_plus, r.signature.n_minus) == brute

    def test_formula_examples(self):
        assert signature_formula((1, 3, 4, 6), 7, 4) == (4, 8)
        assert signature_formula((1, 2, 3), 6, 3) == (0, 9)
        for j in range(1, 6):
            assert signature_formula((j,), 5, 1) == tuple(sorted((j - 1, 5 - j)))

    @given(st.integers(2, 8), st.data())
    def test_oriented_prediction_matches_pair(self, n, data):
        p = data.draw(st.integers(1, n - 1))
        idx = tuple(sorted(data.draw(st.sets(st.integers(1, n), min_size=p, max_size=p))))
        pred = predicted_signature(idx, n, p)
        assert pred.pair == signature_formula(idx, n, p)
        assert pred.n_plus + pred.n_minus == n * p - p * p


class TestPartitions:
    def test_examples(self):
        assert count_partitions_Q(2, 5) == 2
        for p in range(1, 7):
            assert count_partitions_Q(p, p * (p + 1) // 2) == 1
        # {1,2,4,7} {1,2,5,6} {1,3,4,6} {2,3,4,5}
        assert count_partitions_Q(4, 14, max_part=7) == 4 == _distinct_partitions(4, 14, 7)

    @given(st.integers(1, 6), st.integers(1, 30))
    def test_unbounded_against_enumeration(self, p, m):
        assert count_partitions_Q(p, m) == _distinct_partitions(p, m)

    @given(st.integers(1, 6), st.integers(1, 30), st.integers(1, 10))
    def test_bounded_against_enumeration(self, p, m, n):
        assert count_partitions_Q(p, m, max_part=n) == _distinct_partitions(p, m, n)

    def test_P_small_values(self):
        # partitions of 7 into exactly 3 parts: 5+1+1, 4+2+1, 3+3+1, 3+2+2
        assert count_partitions_P(7, 3) == 4
        assert count_partitions_P(0, 0) == 1 and count_partitions_P(3, 0) == 0

    def test_census_totals(self):
        for n in range(1, 11):
            for p in range(1, min(n, 5) + 1):
                assert sum(census_prediction(n, p).values()) == math.comb(n, p)


class TestCensus:
    def test_p1_n4(self):
        pr = make_problem(31, 4, 1, 0.05)
        cen = signature_census(pr.A, pr.Q, pr.L, 1, 0.05)
        assert cen.table == {(0, 3): 2, (1, 2): 2}
        assert sorted(r.signature[:2] for r in cen.records) == [(0, 3), (1, 2), (2, 1), (3, 0)]

    def test_n6_p2_matches_bounded_prediction(self):
        pr = make_problem(32, 6, 2, 0.05)
        cen = signature_census(pr.A, pr.Q, pr.L, 2, 0.05)
        assert cen.table == census_prediction(6, 2)
        assert cen.total == 15


class TestGammaStar:
    def test_scalar_censored(self):
        gs = gamma_star([[-1.0]], [[1.0]], [[1.0]], 1, gamma_max=5.0)
        assert gs.censored and gs.gamma_star == 5.0

    def test_deep_margin_exceeds(self):
        pr = make_problem(41, 4, 1, 0.0, margin=3.0)
        gs = gamma_star(pr.A, 0.5 * np.eye(4), pr.L, 1, gamma_max=10.0, grid_size=8)
        assert gs.exceeds(3.0)
