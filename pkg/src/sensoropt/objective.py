"""Cost ``J = tr(L K)`` on Sym(n, p) with its gradient and Hessian.

``K`` is the stabilizing solution of ``A^T K + K A + Q - gamma K C K = 0`` and
``R`` solves ``F R + R F^T + L = 0`` with closed loop ``F = A - gamma C K``.
Differentiating ``J`` along ``t -> exp(t Omega) C exp(-t Omega)`` gives

    dJ = -gamma tr(Omega [C, M]),    M = K R K,

so with respect to the normal metric the gradient has generator
``gamma [C, M]`` and ``X = gamma [C, [C, M]]``.  Every integral
representation (derivatives of ``K`` and ``R``) is evaluated as a Lyapunov
solve against the closed loop.
"""

from dataclasses import dataclass

import numpy as np

from .densela import (LyapunovSolver, as_square, care_solve, check_spd,
                      commutator, is_stable)
from .errors import DimensionError, InputError
from .isospectral import Projector, TangentVector, tangent_basis


@dataclass(frozen=True, eq=False)
class SensorProblem:
    """One design instance ``(A, Q, L, gamma, p)``.

    ``A`` must be stable; ``Q`` and ``L`` symmetric positive definite.
    """

    A: np.ndarray
    Q: np.ndarray
    L: np.ndarray
    gamma: float
    p: int

    def __post_init__(self):
        A = as_square(self.A, "A")
        n = A.shape[0]
        stable, margin = is_stable(A)
        if not stable:
            raise InputError(f"A is not stable (max Re lambda = {-margin:.4g})")
        Q = check_spd(self.Q, "Q")
        L = check_spd(self.L, "L")
        if Q.shape != (n, n) or L.shape != (n, n):
            raise DimensionError("A, Q and L must share one dimension")
        if not self.gamma >= 0:
            raise InputError("gamma must be nonnegative")
        if not 1 <= int(self.p) <= n:
            raise InputError(f"need 1 <= p <= n, got p={self.p}, n={n}")
        for name, val in (("A", A), ("Q", Q), ("L", L)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "p", int(self.p))

    @property
    def n(self):
        return self.A.shape[0]

    def with_gamma(self, gamma):
        return SensorProblem(self.A, self.Q, self.L, gamma, self.p)


def _C(C):
    return C.C if isinstance(C, Projector) else np.asarray(C, dtype=float)


@dataclass(frozen=True, eq=False)
class CostEvaluation:
    """Everything computed at one point ``C``.

    ``grad_norm`` is the normal-metric norm of the gradient and
    ``bracket_norm`` the Frobenius norm of ``[C, M]``.
    """

    C: np.ndarray
    K: np.ndarray
    R: np.ndarray
    M: np.ndarray
    J: float
    closed_loop: np.ndarray
    riccati_residual: float
    lyapunov_residual: float
    gamma: float

    @property
    def bracket(self):
        return commutator(self.C, self.M)

    @property
    def bracket_norm(self):
        return float(np.linalg.norm(self.bracket))

    @property
    def grad_omega(self):
        return self.gamma * self.bracket

    @property
    def grad_norm(self):
        return self.gamma * self.bracket_norm

    def to_dict(self):
        return {
            "J": self.J,
            "grad_norm": self.grad_norm,
            "K": self.K.tolist(),
            "R": self.R.tolist(),
            "M": self.M.tolist(),
            "residuals": {"riccati": self.riccati_residual,
                          "lyapunov": self.lyapunov_residual},
        }


def evaluate(problem, C, K0=None):
    """Solve for ``K``, ``R`` and ``M`` at ``C`` and bundle the results."""
    Cm = _C(C)
    sol = care_solve(problem.A, Cm, problem.Q, problem.gamma, K0=K0)
    K = sol.K
    F = sol.closed_loop
    R = LyapunovSolver(F).solve(problem.L)
    lres = float(np.linalg.norm(F @ R + R @ F.T + problem.L))
    M = K @ R @ K
    M = 0.5 * (M + M.T)
    J = float(np.sum(problem.L * K))
    return CostEvaluation(Cm, K, R, M, J, F, sol.residual_norm, lres, problem.gamma)


def solve_KR(problem, C):
    """Return ``(K, R)`` at ``C``."""
    ev = evaluate(problem, C)
    return ev.K, ev.R


def cost_J(problem, C):
    """``J = tr(L K)``."""
    return evaluate(problem, C).J


def big_M(problem, C):
    """``M = K R K``."""
    return evaluate(problem, C).M


def grad_J(problem, C, ev=None):
    """Riemannian gradient as a :class:`TangentVector`.

    Its generator is ``gamma [C, M]``; it vanishes exactly when ``C``
    commutes with ``M``.
    """
    C = C if isinstance(C, Projector) else Projector(C, problem.p)
    ev = ev or evaluate(problem, C)
    return TangentVector(C, ev.grad_omega)


def directional_derivative(problem, C, Omega, ev=None):
    """``d/dt J(exp(t Omega) C exp(-t Omega))`` at ``t = 0``."""
    ev = ev or evaluate(problem, C)
    return -problem.gamma * float(np.sum(Omega * ev.bracket.T))


class _HessianPieces:
    """Per-point data shared by every Hessian entry."""

    def __init__(self, problem, C, ev):
        self.g = problem.gamma
        self.C = _C(C)
        self.ev = ev
        F = ev.closed_loop
        self.lyap_F = LyapunovSolver(F)
        self.lyap_Ft = LyapunovSolver(F.T)

    def first_order(self, Ox):
        """``G`` with ``X.Y.J = tr(Omega_y G)`` for constant fields."""
        g, C, ev = self.g, self.C, self.ev
        K, R, M = ev.K, ev.R, ev.M
        Cdot = commutator(Ox, C)
        # derivative of the Riccati equation: F^T K' + K' F - g K C' K = 0
        dK = self.lyap_Ft.solve(-g * K @ Cdot @ K)
        # derivative of F R + R F^T + L = 0 with F' = -g (C' K + C K')
        S = (Cdot @ K + C @ dK) @ R
        dR = self.lyap_F.solve(-g * (S + S.T))
        dM = dK @ R @ K + K @ dR @ K + K @ R @ dK
        return -g * (commutator(Cdot, M) + commutator(C, dM))

    def connection(self, Ox, Oy):
        # Levi-Civita term for constant fields; vanishes at extremal points
        return -0.5 * self.g * float(np.sum(self.ev.bracket * commutator(Ox, Oy).T))


def hessian_form(problem, C, Ox, Oy, ev=None):
    """Hessian of ``J`` (normal metric) on the tangent vectors generated by
    ``Ox`` and ``Oy``.

    Equal to ``gamma tr{[C,Ox][M,Oy] + [C, V R K + K W K + K R V] Oy
    - 1/2 [C,M][Ox,Oy]}`` with ``V = -K'`` and ``W = -R'`` the derivatives
    of ``K`` and ``R`` along ``Ox``.  Symmetric at extremal points.
    """
    ev = ev or evaluate(problem, C)
    Ox = np.asarray(Ox, dtype=float)
    Oy = np.asarray(Oy, dtype=float)
    if not Ox.any() or not Oy.any() or problem.gamma == 0:
        return 0.0
    hp = _HessianPieces(problem, C, ev)
    G = hp.first_order(Ox)
    return float(np.sum(Oy * G.T)) + hp.connection(Ox, Oy)


def hessian_matrix(problem, C, ev=None, basis=None):
    """Hessian in the orthonormal :func:`tangent_basis` coordinates.

    Returns
    -------
    H : ndarray, shape (d, d)
        Symmetrized ``(H + H^T) / 2``.
    asymmetry : float
        ``||H_raw - H_raw^T|| / ||H_raw||`` before symmetrization.
    """
    C = C if isinstance(C, Projector) else Projector(C, problem.p)
    ev = ev or evaluate(problem, C)
    basis = tangent_basis(C) if basis is None else basis
    d = len(basis)
    H = np.zeros((d, d))
    if d == 0 or problem.gamma == 0:
        return H, 0.0
    hp = _HessianPieces(problem, C, ev)
    Oms = np.array([b.omega for b in basis])
    for a, Oa in enumerate(Oms):
        G = hp.first_order(Oa)
        H[a] = np.einsum("bij,ji->b", Oms, G)
        for b in range(d):
            H[a, b] += hp.connection(Oa, Oms[b])
    nrm = np.linalg.norm(H)
    asym = float(np.linalg.norm(H - H.T) / nrm) if nrm > 0 else 0.0
    return 0.5 * (H + H.T), asym


def hessian_smallgamma(C, M0, Ox, Oy):
    """Leading small-gamma Hessian with the gamma prefactor removed:
    ``tr{[C,Ox][M0,Oy] - 1/2 [C,M0][Ox,Oy]}``."""
    C = _C(C)
    first = np.sum(commutator(C, Ox) * commutator(M0, Oy).T)
    second = np.sum(commutator(C, M0) * commutator(Ox, Oy).T)
    return float(first - 0.5 * second)


def gamma0_matrices(A, Q, L):
    """``(K0, R0, M0)`` from the two open-loop Lyapunov equations."""
    A = as_square(A, "A")
    K0 = LyapunovSolver(A.T).solve(np.asarray(Q, dtype=float))
    R0 = LyapunovSolver(A).solve(np.asarray(L, dtype=float))
    M0 = K0 @ R0 @ K0
    return K0, R0, 0.5 * (M0 + M0.T)
