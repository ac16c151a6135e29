"""Shared builders and independent oracles for the test suite."""

import numpy as np

from sensoropt.densela import random_spd, random_stable
from sensoropt.isospectral import random_projector, tangent_basis
from sensoropt.objective import SensorProblem
from sensoropt.rng import stream


def make_problem(seed, n, p, gamma, margin=1.0, random_weights=False):
    A = random_stable(n, -margin, seed, 0)
    if random_weights:
        rng = stream(seed, 1)
        Q, L = random_spd(n, rng), random_spd(n, rng)
    else:
        Q, L = np.eye(n), np.eye(n)
    return SensorProblem(A, Q, L, gamma, p)


def random_tangent_omega(C, seed, *indices):
    """Unit-norm random combination of the orthonormal tangent basis."""
    basis = tangent_basis(C)
    w = stream(seed, *indices).standard_normal(len(basis))
    w /= np.linalg.norm(w)
    return sum(wi * b.omega for wi, b in zip(w, basis))


def kron_lyapunov(F, P):
    """Solve F X + X F^T + P = 0 by vectorization."""
    n = len(F)
    I = np.eye(n)
    op = np.kron(I, F) + np.kron(F, I)
    return np.linalg.solve(op, -np.asarray(P).reshape(-1, order="F")).reshape(n, n, order="F")


def instance_set(count=50, seed=2024):
    """(problem, C) pairs with n in 3..6, p in 1..2, gamma in {0.05, 0.5}."""
    out = []
    for k in range(count):
        rng = stream(seed, k)
        n = int(rng.integers(3, 7))
        p = int(rng.integers(1, 3))
        gamma = (0.05, 0.5)[k % 2]
        pr = make_problem(seed + k, n, p, gamma, random_weights=bool(k % 3 == 0))
        out.append((pr, random_projector(n, p, seed, 99, k)))
    return out
