"""The manifold Sym(n, p) of rank-p orthogonal projectors.

A tangent vector at ``C`` is written ``X = [C, Omega]`` with ``Omega`` skew.
The canonical generator of ``X`` is the unique ``Omega`` orthogonal to
``ker ad_C``; for a projector it is simply ``[C, X]`` because ``ad_C`` squares
to the identity on the off-block part of so(n).

Moving along a generator means following ``retract(C, Omega, t) =
exp(t Omega) C exp(-t Omega)``, whose velocity at ``t = 0`` is
``[Omega, C] = -X``.  Directional derivatives and gradients in the rest of
the package use this orientation.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .densela import commutator, expm, sym_eig
from .errors import DimensionError, InputError
from .rng import stream

PROJ_SYM_TOL = 1e-10
PROJ_IDEM_TOL = 1e-8
_REPROJECT_TOL = 1e-12


def _reproject(C, p):
    """Nearest rank-p projector to a symmetric matrix."""
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    Vp = V[:, -p:] if p else V[:, :0]
    return Vp @ Vp.T


@dataclass(frozen=True, eq=False)
class Projector:
    """A point of Sym(n, p): symmetric, idempotent, trace ``p``."""

    C: np.ndarray
    p: int = field(default=-1)

    def __post_init__(self):
        C = np.array(self.C, dtype=float, ndmin=2)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise DimensionError(f"projector must be square, got {C.shape}")
        p = int(round(np.trace(C))) if self.p < 0 else int(self.p)
        if np.linalg.norm(C - C.T) > PROJ_SYM_TOL:
            raise InputError("projector is not symmetric")
        if np.linalg.norm(C @ C - C) > PROJ_IDEM_TOL:
            raise InputError(f"matrix is not idempotent (||C^2 - C|| = "
                             f"{np.linalg.norm(C @ C - C):.2e})")
        if abs(np.trace(C) - p) > PROJ_IDEM_TOL:
            raise InputError(f"trace {np.trace(C):.6g} does not match rank {p}")
        C = 0.5 * (C + C.T)
        C.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def dim(self):
        """Dimension ``np - p^2`` of the manifold through this point."""
        return self.n * self.p - self.p ** 2

    @classmethod
    def from_diagonal(cls, index_set, n):
        """Coordinate projector onto the 0-based indices in ``index_set``."""
        d = np.zeros(n)
        d[list(index_set)] = 1.0
        return cls(np.diag(d), len(index_set))

    @classmethod
    def from_span(cls, V):
        """Projector onto the column span of ``V`` (columns orthonormalized)."""
        V = np.array(V, dtype=float, ndmin=2)
        Qm, _ = np.linalg.qr(V)
        return cls(Qm @ Qm.T, V.shape[1])


def _as_array(C):
    return C.C if isinstance(C, Projector) else np.asarray(C, dtype=float)


def projector_from_sensor(c, tol=1e-10):
    """``C = c^T c`` for a ``p x n`` sensor with orthonormal rows."""
    c = np.array(c, dtype=float, ndmin=2)
    p = c.shape[0]
    if np.linalg.norm(c @ c.T - np.eye(p)) > tol:
        raise InputError("sensor rows are not orthonormal")
    return Projector(c.T @ c, p)


def sensor_from_projector(C, tol=1e-6):
    """Orthonormal rows spanning the range of ``C``.

    Rows are the unit eigenvectors for eigenvalue 1, ordered as returned by
    :func:`~sensoropt.densela.sym_eig` (descending eigenvalue, then index)
    with its sign convention.
    """
    C = C if isinstance(C, Projector) else Projector(C)
    w, V = sym_eig(C.C)
    if np.max(np.minimum(np.abs(w), np.abs(w - 1.0))) > tol:
        raise InputError("eigenvalues of C are not clustered at 0 and 1")
    return V[:, :C.p].T.copy()


def random_projector(n, p, seed, *indices):
    """Projector onto the row space of a Gaussian ``p x n`` sample."""
    if not 1 <= p <= n:
        raise InputError(f"need 1 <= p <= n, got n={n}, p={p}")
    rng = stream(seed, *indices)
    while True:
        G = rng.standard_normal((p, n))
        if np.linalg.matrix_rank(G) == p:
            break
    Qm, _ = np.linalg.qr(G.T)
    return Projector(Qm @ Qm.T, p)


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Tangent vector ``X = [C, omega]`` stored with its canonical generator."""

    base: Projector
    omega: np.ndarray

    @property
    def X(self):
        return commutator(self.base.C, self.omega)

    def __mul__(self, s):
        return TangentVector(self.base, s * self.omega)

    __rmul__ = __mul__


def project_generator(C, Omega):
    """Component of a skew matrix orthogonal to ``ker ad_C``."""
    C = _as_array(C)
    return commutator(C, commutator(C, Omega))


def canonical_omega(C, X, tol=1e-8):
    """Minimum-norm skew ``Omega`` with ``[C, Omega] = X``.

    Raises
    ------
    InputError
        If ``X`` is not tangent to Sym(n, p) at ``C``.
    """
    C = _as_array(C)
    X = np.asarray(X, dtype=float)
    scale = max(1.0, np.linalg.norm(X))
    if np.linalg.norm(X - X.T) > tol * scale:
        raise InputError("tangent vectors at a projector are symmetric")
    if np.linalg.norm(commutator(C, commutator(C, X)) - X) > tol * scale:
        raise InputError("X is not in the image of ad_C")
    return commutator(C, X)


def tangent_vector(C, Omega):
    """Tangent vector generated by an arbitrary skew ``Omega``."""
    C = C if isinstance(C, Projector) else Projector(C)
    return TangentVector(C, project_generator(C.C, Omega))


def tangent_basis(C):
    """Orthonormal basis of ``T_C Sym(n, p)`` for the normal metric.

    In the eigenbasis ``Theta`` of ``C`` (range first) the generators are
    ``Omega_ij / sqrt(2)`` for ``i`` in the range block and ``j`` in the
    kernel block, ``i``-major.
    """
    C = C if isinstance(C, Projector) else Projector(C)
    n, p = C.n, C.p
    _, Theta = sym_eig(C.C)
    basis = []
    r2 = np.sqrt(0.5)
    for i in range(p):
        for j in range(p, n):
            # Theta (E_ij - E_ji) Theta^T / sqrt(2)
            a, b = Theta[:, i], Theta[:, j]
            Om = r2 * (np.outer(a, b) - np.outer(b, a))
            basis.append(TangentVector(C, Om))
    return basis


def normal_metric(X, Y):
    """``-tr(Omega_x Omega_y)`` for tangent vectors at the same base point."""
    if X.base is not Y.base and not np.array_equal(X.base.C, Y.base.C):
        raise InputError("tangent vectors live at different base points")
    return -float(np.sum(X.omega * Y.omega.T))


def retract(C, Omega, t=1.0):
    """``exp(t Omega) C exp(-t Omega)``, cleaned back onto Sym(n, p)."""
    C = C if isinstance(C, Projector) else Projector(C)
    if t == 0:
        return C
    U = expm(t * np.asarray(Omega, dtype=float))
    Cn = U @ C.C @ U.T
    Cn = 0.5 * (Cn + Cn.T)
    if np.linalg.norm(Cn @ Cn - Cn) > _REPROJECT_TOL:
        Cn = _reproject(Cn, C.p)
    return Projector(Cn, C.p)


def principal_angles(C1, C2):
    """Principal angles (radians, ascending) between two ranges."""
    C1 = C1 if isinstance(C1, Projector) else Projector(C1)
    C2 = C2 if isinstance(C2, Projector) else Projector(C2)
    if C1.p != C2.p or C1.n != C2.n:
        raise DimensionError("subspaces of different dimensions")
    U1 = sensor_from_projector(C1).T
    U2 = sensor_from_projector(C2).T
    return np.sort(scipy.linalg.subspace_angles(U1, U2))


def skew_basis_element(n, i, j):
    """``Omega_ij``: +1 at (i, j), -1 at (j, i)."""
    Om = np.zeros((n, n))
    Om[i, j], Om[j, i] = 1.0, -1.0
    return Om


def sym_basis_element(n, i, j):
    """``Sigma_ij``: ones at (i, j) and (j, i)."""
    S = np.zeros((n, n))
    S[i, j] = S[j, i] = 1.0
    return S
