"""Dense real linear algebra.

Stability tests, ordered symmetric eigendecompositions, the matrix
exponential, Lyapunov and algebraic Riccati solvers, and random stable
ensembles.  Everything here is a pure function of its arguments.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dtrsyl

from .errors import DimensionError, InputError, SolverError
from .rng import stream

#: Relative residual target for the Riccati solver.
RICCATI_TOL = 1e-10
#: Newton-Kleinman iteration cap.
RICCATI_MAX_ITER = 50
#: Relative symmetry tolerance for inputs declared symmetric.
SYM_TOL = 1e-10


def as_square(A, name="A"):
    """Return ``A`` as a finite 2-D float array, checking it is square."""
    A = np.array(A, dtype=float, ndmin=2)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} has non-finite entries")
    return A


def check_symmetric(S, name="S", tol=SYM_TOL):
    S = as_square(S, name)
    scale = max(1.0, np.linalg.norm(S))
    if np.linalg.norm(S - S.T) > tol * scale:
        raise InputError(f"{name} is not symmetric (asymmetry "
                         f"{np.linalg.norm(S - S.T):.3e})")
    return 0.5 * (S + S.T)


def check_spd(S, name="S"):
    """Symmetrize ``S`` and check that it is positive definite."""
    S = check_symmetric(S, name)
    lo = np.linalg.eigvalsh(S)[0]
    if not lo > 0:
        raise InputError(f"{name} is not positive definite (min eigenvalue {lo:.3e})")
    return S


def is_stable(A):
    """Test whether every eigenvalue of ``A`` has negative real part.

    Returns
    -------
    stable : bool
    margin : float
        ``-max Re(lambda)``; positive exactly when ``stable``.
    """
    A = as_square(A)
    margin = -float(np.max(np.linalg.eigvals(A).real))
    return margin > 0, margin + 0.0


def sym_eig(S):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Ties keep index order.  Each eigenvector is signed so that its entry of
    largest magnitude (first one on ties) is nonnegative.

    Returns
    -------
    w : ndarray, shape (n,)
    V : ndarray, shape (n, n)
        Orthogonal, ``S = V @ diag(w) @ V.T``.
    """
    S = check_symmetric(S)
    w, V = np.linalg.eigh(S)
    # eigh is ascending; a stable sort on -w keeps ties in index order
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    # for exact ties, eigh may return any rotation; prefer the identity-like
    # basis when S is already diagonal
    if np.count_nonzero(S - np.diag(np.diag(S))) == 0:
        d = np.diag(S)
        order = np.argsort(-d, kind="stable")
        w = d[order].copy()
        V = np.eye(len(d))[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return w, V * signs


def expm(W):
    """Matrix exponential (scaling and squaring with Pade approximants)."""
    return scipy.linalg.expm(as_square(W, "W"))


class LyapunovSolver:
    """Solve ``F X + X F^T + P = 0`` for many right-hand sides.

    The real Schur form of ``F`` is computed once (Bartels-Stewart), so each
    additional solve costs one quasi-triangular Sylvester sweep.

    Raises
    ------
    SolverError
        If ``F`` is not stable; the message names the offending eigenvalue.
    """

    def __init__(self, F):
        F = as_square(F, "F")
        T, U = scipy.linalg.schur(F, output="real")
        eig = np.linalg.eigvals(T) if len(T) > 1 else np.diag(T).astype(complex)
        worst = eig[np.argmax(eig.real)]
        if not worst.real < 0:
            raise SolverError(f"Lyapunov operator is not stable: eigenvalue "
                              f"{worst:.6g} has nonnegative real part")
        self.F, self._T, self._U = F, T, U

    def solve(self, P):
        U = self._U
        rhs = -(U.T @ P @ U)
        Y, scale, info = dtrsyl(self._T, self._T, rhs, trana="N", tranb="T")
        if info < 0:
            raise SolverError(f"dtrsyl failed (info={info})")
        X = U @ (Y / scale) @ U.T
        return 0.5 * (X + X.T)


def lyapunov_solve(F, P):
    """Solve ``F X + X F^T + P = 0`` for symmetric ``X``.

    ``F`` must be stable.  When ``P`` is positive definite so is ``X``.
    """
    P = check_symmetric(P, "P")
    solver = LyapunovSolver(F)
    if P.shape != solver.F.shape:
        raise DimensionError(f"P has shape {P.shape}, expected {solver.F.shape}")
    return solver.solve(P)


@dataclass(frozen=True)
class RiccatiSolution:
    """Stabilizing solution of ``A^T K + K A + Q - gamma K C K = 0``."""

    K: np.ndarray
    closed_loop: np.ndarray
    residual_norm: float
    iterations: int


def riccati_residual(A, C, Q, gamma, K):
    return A.T @ K + K @ A + Q - gamma * K @ C @ K


def care_solve(A, C, Q, gamma, K0=None, tol=RICCATI_TOL, max_iter=RICCATI_MAX_ITER,
               polish=True):
    """Stabilizing solution of ``A^T K + K A + Q - gamma K C K = 0``.

    Newton-Kleinman iteration.  Each step solves the Lyapunov equation
    ``F^T K + K F + Q + gamma K_k C K_k = 0`` with ``F = A - gamma C K_k``.
    Because ``A`` is stable, ``K = 0`` is a stabilizing start.

    Parameters
    ----------
    A : (n, n) array_like
        Stable drift matrix.
    C : (n, n) array_like
        Symmetric positive semidefinite sensing matrix.
    Q : (n, n) array_like
        Symmetric positive definite.
    gamma : float
        Nonnegative gain.
    K0 : (n, n) array_like, optional
        Warm start; ignored unless ``A - gamma C K0`` is stable.
    tol : float
        Stop when the residual norm is below ``tol * max(1, ||Q||)``.
    max_iter : int
    polish : bool
        Take one extra Newton step once ``tol`` is met.

    Returns
    -------
    RiccatiSolution
    """
    A = as_square(A, "A")
    n = A.shape[0]
    C = check_symmetric(C, "C")
    Q = check_symmetric(Q, "Q")
    if C.shape != (n, n) or Q.shape != (n, n):
        raise DimensionError("A, C and Q must have the same shape")
    if gamma < 0:
        raise InputError(f"gamma must be nonnegative, got {gamma}")
    target = tol * max(1.0, np.linalg.norm(Q))

    if gamma == 0:
        K = LyapunovSolver(A.T).solve(Q)
        res = np.linalg.norm(riccati_residual(A, C, Q, 0.0, K))
        return RiccatiSolution(K, A.copy(), float(res), 1)

    K = np.zeros((n, n))
    if K0 is not None:
        K0 = np.asarray(K0, dtype=float)
        if np.max(np.linalg.eigvals(A - gamma * C @ K0).real) < 0:
            K = K0
    history = []
    for it in range(1, max_iter + 1):
        F = A - gamma * C @ K
        try:
            K = LyapunovSolver(F.T).solve(Q + gamma * K @ C @ K)
        except SolverError as exc:
            raise SolverError(f"Newton-Kleinman inner solve failed at "
                              f"iteration {it}: {exc}", history) from exc
        res = float(np.linalg.norm(riccati_residual(A, C, Q, gamma, K)))
        history.append(res)
        if res <= target:
            if polish:
                # one more quadratic step takes K to rounding level
                F = A - gamma * C @ K
                try:
                    Kp = LyapunovSolver(F.T).solve(Q + gamma * K @ C @ K)
                    rp = float(np.linalg.norm(riccati_residual(A, C, Q, gamma, Kp)))
                    if rp <= res:
                        K, res, it = Kp, rp, it + 1
                except SolverError:
                    pass
            return RiccatiSolution(K, A - gamma * C @ K, res, it)
    raise SolverError(f"Riccati iteration did not reach {target:.2e} in "
                      f"{max_iter} steps (last residual {history[-1]:.2e})", history)


def random_stable(n, target_max_re, seed, *indices):
    """Gaussian ``n x n`` matrix shifted so that ``max Re(lambda) = target_max_re``.

    Extra ``indices`` select an independent stream under the same seed.
    """
    if n < 1:
        raise InputError("n must be positive")
    if not target_max_re < 0:
        raise InputError("target_max_re must be negative")
    A = stream(seed, *indices).standard_normal((n, n))
    mu = np.max(np.linalg.eigvals(A).real)
    A -= (mu - target_max_re) * np.eye(n)
    return A


def random_spd(n, rng):
    """Random symmetric positive definite matrix ``G G^T + n^{-1} I``."""
    G = rng.standard_normal((n, n))
    return G @ G.T / n + np.eye(n) / n


def commutator(X, Y):
    return X @ Y - Y @ X
