"""Extremal points of J: enumeration, continuation in gamma, signatures.

At ``gamma = 0`` the extremal points are the ``C(n, p)`` projectors onto
spans of eigenvectors of ``M0 = K0 R0 K0``.  They are followed to
``gamma > 0`` by Newton correction on ``[C, M(C)] = 0`` in orthonormal
tangent coordinates, using the exact Hessian as the Jacobian.

Index sets are 1-based positions in the descending eigenvalue order of
``M0``.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .densela import sym_eig
from .errors import ContinuationError, DegeneracyError, InputError, SolverError
from .isospectral import Projector, principal_angles, retract, tangent_basis
from .objective import SensorProblem, evaluate, gamma0_matrices, hessian_matrix

#: Convergence target on ``||[C, M]||`` for continued extremals.
BRACKET_TOL = 1e-9
#: Relative eigenvalue gap of ``M0`` below which enumeration refuses.
GAP_TOL = 1e-10
#: Hessian eigenvalues below this fraction of ``max |eig|`` count as zero.
ZERO_TOL = 1e-8
#: Abort continuation when the tracked span turns by more than this.
MAX_TURN = math.pi / 4


class Signature(NamedTuple):
    n_plus: int
    n_minus: int
    n_zero: int

    @property
    def pair(self):
        """Unordered ``{n_plus, n_minus}`` as a sorted tuple."""
        return tuple(sorted((self.n_plus, self.n_minus)))


@dataclass(frozen=True, eq=False)
class ExtremalRecord:
    index_set: tuple
    C: Projector
    J: float
    signature: Optional[Signature]
    sig_formula_pair: tuple
    continued_gamma: float
    K: Optional[np.ndarray] = None

    def to_row(self):
        s = self.signature or Signature(-1, -1, -1)
        return {
            "index_set": " ".join(str(i) for i in self.index_set),
            "J": self.J,
            "n_plus": s.n_plus,
            "n_minus": s.n_minus,
            "n_zero": s.n_zero,
            "continued_gamma": self.continued_gamma,
        }


def signature_formula(index_set, n, p):
    """Unordered signature pair ``{m - p(p+1)/2, np - p(p-1)/2 - m}``,
    ``m`` the sum of the 1-based indices."""
    index_set = tuple(index_set)
    if len(index_set) != p or len(set(index_set)) != p:
        raise InputError("index_set must hold p distinct indices")
    if min(index_set) < 1 or max(index_set) > n:
        raise InputError("indices must lie in 1..n")
    m = sum(index_set)
    a = m - p * (p + 1) // 2
    b = n * p - p * (p - 1) // 2 - m
    return tuple(sorted((a, b)))


def predicted_signature(index_set, n, p):
    """Oriented small-gamma signature.

    Each pair ``(i, j)`` with ``i`` in the set, ``j`` outside, contributes a
    Hessian eigenvalue proportional to ``d_i - d_j``; with ``M0`` eigenvalues
    descending it is positive iff ``i < j``.  The top subspace is therefore
    the positive definite one (the minimum).
    """
    s = set(index_set)
    plus = sum(1 for i in s for j in range(1, n + 1) if j not in s and i < j)
    d = n * p - p * p
    return Signature(plus, d - plus, 0)


def m0_spectrum(A, Q, L, gap_tol=GAP_TOL):
    """Descending eigenpairs of ``M0``, refusing near-degenerate spectra."""
    _, _, M0 = gamma0_matrices(A, Q, L)
    w, V = sym_eig(M0)
    if len(w) > 1:
        gap = float(np.min(-np.diff(w)))
        if gap <= gap_tol * abs(w[0]):
            raise DegeneracyError(
                f"M0 has a near-repeated eigenvalue (gap {gap:.3e}); "
                "resample Q and L")
    return w, V, M0


def enumerate_extremals_gamma0(A, Q, L, p):
    """All ``C(n, p)`` extremal points at ``gamma = 0``, lexicographic in
    the index set."""
    w, V, M0 = m0_spectrum(A, Q, L)
    n = len(w)
    if not 1 <= p <= n:
        raise InputError(f"need 1 <= p <= n, got p={p}")
    K0 = gamma0_matrices(A, Q, L)[0]
    J0 = float(np.sum(np.asarray(L) * K0))
    records = []
    for idx in itertools.combinations(range(n), p):
        Vs = V[:, idx]
        C = Projector(Vs @ Vs.T, p)
        one = tuple(i + 1 for i in idx)
        records.append(ExtremalRecord(one, C, J0, None,
                                      signature_formula(one, n, p), 0.0, K0))
    return records


def signature_numeric(problem, C, ev=None, zero_tol=ZERO_TOL):
    """Eigenvalue sign counts of the Hessian at ``C``."""
    H, _ = hessian_matrix(problem, C, ev=ev)
    return _signature_of(H, zero_tol)


def _signature_of(H, zero_tol=ZERO_TOL):
    if H.size == 0:
        return Signature(0, 0, 0)
    eig = np.linalg.eigvalsh(H)
    thr = zero_tol * np.max(np.abs(eig))
    return Signature(int(np.sum(eig > thr)), int(np.sum(eig < -thr)),
                     int(np.sum(np.abs(eig) <= thr)))


def newton_correct(problem, C, K0=None, tol=BRACKET_TOL, max_iter=30):
    """Drive ``[C, M(C)]`` to zero by Riemannian Newton steps.

    Returns ``(C, ev, H)`` at the converged point, ``H`` the Hessian there.

    Raises
    ------
    ContinuationError
        If the bracket does not fall below ``tol``.
    """
    C = C if isinstance(C, Projector) else Projector(C, problem.p)
    ev = evaluate(problem, C, K0=K0)
    history = [ev.bracket_norm]
    for _ in range(max_iter):
        basis = tangent_basis(C)
        H, _ = hessian_matrix(problem, C, ev=ev, basis=basis)
        if history[-1] <= tol:
            return C, ev, H
        Oms = np.array([b.omega for b in basis])
        g = -problem.gamma * np.einsum("aij,ji->a", Oms, ev.bracket)
        try:
            delta = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError as exc:
            raise ContinuationError("singular Hessian in Newton correction",
                                    problem.gamma, history) from exc
        step = np.einsum("a,aij->ij", delta, Oms)
        # damp until the bracket decreases
        t = 1.0
        for _ in range(12):
            Cn = retract(C, step, t)
            evn = evaluate(problem, Cn, K0=ev.K)
            if evn.bracket_norm < history[-1]:
                break
            t *= 0.5
        else:
            raise ContinuationError("Newton correction stalled",
                                    problem.gamma, history)
        C, ev = Cn, evn
        history.append(ev.bracket_norm)
    if history[-1] <= tol:
        H, _ = hessian_matrix(problem, C, ev=ev)
        return C, ev, H
    raise ContinuationError(f"Newton correction did not converge "
                            f"(||[C,M]|| = {history[-1]:.2e})",
                            problem.gamma, history)


def _track(problem, C, K, g_from, g_to, max_depth=4, max_turn=MAX_TURN):
    """Follow one extremal from ``g_from`` to ``g_to`` with bisected
    substeps on failure.  Returns ``(C, ev, H)`` at ``g_to``."""
    try:
        Cn, ev, H = newton_correct(problem.with_gamma(g_to), C, K0=K)
        turn = float(np.max(principal_angles(C, Cn)))
        if turn > max_turn:
            raise ContinuationError(f"tracked span turned by {turn:.3f} rad",
                                    g_to)
        return Cn, ev, H
    except (ContinuationError, SolverError) as exc:
        if max_depth == 0:
            if isinstance(exc, ContinuationError):
                exc.gamma = g_to
                raise
            raise ContinuationError(str(exc), g_to) from exc
    mid = 0.5 * (g_from + g_to)
    Cm, evm, _ = _track(problem, C, K, g_from, mid, max_depth - 1, max_turn)
    return _track(problem, Cm, evm.K, mid, g_to, max_depth - 1, max_turn)


def continue_extremal(problem, record, substeps=16):
    """Follow a ``gamma = 0`` extremal to ``problem.gamma``.

    Uses ``substeps`` equal gamma increments, each refined by bisection if
    Newton correction fails.  The result carries the numerical signature.
    """
    if problem.gamma == 0 or problem.n == 1 or problem.p == problem.n:
        ev = evaluate(problem, record.C)
        sig = signature_numeric(problem, record.C, ev)
        return replace(record, J=ev.J, signature=sig,
                       continued_gamma=problem.gamma, K=ev.K)
    C, K = record.C, record.K
    gammas = np.linspace(record.continued_gamma, problem.gamma, substeps + 1)
    for g0, g1 in zip(gammas[:-1], gammas[1:]):
        C, ev, H = _track(problem, C, K, g0, g1)
        K = ev.K
    return replace(record, C=C, J=ev.J, signature=_signature_of(H),
                   continued_gamma=problem.gamma, K=ev.K)


def continue_all(problem, substeps=16):
    """Every extremal of ``problem`` continued from ``gamma = 0``."""
    recs = enumerate_extremals_gamma0(problem.A, problem.Q, problem.L, problem.p)
    return [continue_extremal(problem, r, substeps) for r in recs]


@dataclass(frozen=True)
class Census:
    table: dict
    records: list

    @property
    def total(self):
        return sum(self.table.values())


def signature_census(A, Q, L, p, gamma, substeps=16):
    """Count continued extremals by unordered signature pair."""
    problem = SensorProblem(A, Q, L, gamma, p)
    recs = continue_all(problem, substeps)
    table = Counter(r.signature.pair for r in recs)
    return Census(dict(sorted(table.items())), recs)


# -- partitions ---------------------------------------------------------------

@lru_cache(maxsize=None)
def count_partitions_P(m, p):
    """Partitions of ``m`` into exactly ``p`` positive parts."""
    if m == 0 and p == 0:
        return 1
    if m <= 0 or p <= 0 or m < p:
        return 0
    return count_partitions_P(m - 1, p - 1) + count_partitions_P(m - p, p)


def count_partitions_Q(p, m, max_part=None):
    """Partitions of ``m`` into ``p`` distinct parts.

    Without ``max_part`` this uses ``Q(p, m) = P(m - p(p-1)/2, p)``; with it,
    a direct count of ``p``-subsets of ``{1..max_part}`` summing to ``m``.
    """
    if max_part is None:
        return count_partitions_P(m - p * (p - 1) // 2, p)
    if p < 0 or m < 0:
        return 0
    # ways[k][s]: k-subsets of the parts seen so far summing to s
    ways = [[0] * (m + 1) for _ in range(p + 1)]
    ways[0][0] = 1
    for part in range(1, min(max_part, m) + 1):
        for k in range(min(p, part), 0, -1):
            row, prev = ways[k], ways[k - 1]
            for s in range(m, part - 1, -1):
                row[s] += prev[s - part]
    return ways[p][m]


def census_prediction(n, p):
    """Predicted unordered-pair census for ``Sym(n, p)`` from bounded
    distinct-partition counts."""
    d = n * p - p * p
    base = p * (p + 1) // 2
    table = Counter()
    for k in range(d + 1):
        cnt = count_partitions_Q(p, k + base, max_part=n)
        if cnt:
            table[tuple(sorted((k, d - k)))] += cnt
    return dict(sorted(table.items()))


# -- gamma* -------------------------------------------------------------------

@dataclass(frozen=True)
class GammaStar:
    """``gamma_star`` is ``gamma_max`` when ``censored``."""

    gamma_star: float
    censored: bool
    reason: str

    def exceeds(self, gamma):
        """True when ``gamma < gamma*`` (censored values count as infinite)."""
        return self.censored or gamma < self.gamma_star


def _check_state(problem, states, preds):
    """Return a failure reason or ``None``."""
    for (C, ev, H), pred in zip(states, preds):
        sig = _signature_of(H)
        if sig != pred:
            return f"signature {tuple(sig)} != predicted {tuple(pred)}"
    # distinct tracks must stay distinct
    for a in range(len(states)):
        for b in range(a + 1, len(states)):
            if np.max(principal_angles(states[a][0], states[b][0])) < 1e-4:
                return "two extremal tracks merged"
    return None


def _advance(problem0, states, g_from, g_to):
    out = []
    for C, ev, _ in states:
        out.append(_track(problem0, C, ev.K, g_from, g_to))
    return out


def gamma_star(A, Q, L, p, gamma_max=10.0, grid_size=24, gamma_min=1e-3,
               rel_tol=1e-3):
    """Smallest gamma at which some extremal's Hessian signature leaves its
    small-gamma prediction (or turns degenerate).

    A geometric grid from ``gamma_min`` to ``gamma_max`` is scanned; the first
    failing interval is refined by bisection to ``rel_tol``.  A continuation
    failure counts as a departure at the gamma where it occurred.
    """
    if not gamma_max > 0:
        raise InputError("gamma_max must be positive")
    base = SensorProblem(A, Q, L, 0.0, p)
    n = base.n
    if p == n or n == 1:
        return GammaStar(float(gamma_max), True, "trivial tangent space")
    recs = enumerate_extremals_gamma0(A, Q, L, p)
    preds = [predicted_signature(r.index_set, n, p) for r in recs]
    grid = np.geomspace(min(gamma_min, gamma_max), gamma_max, grid_size)

    def attempt(states, g_from, g_to):
        try:
            new = _advance(base, states, g_from, g_to)
        except (ContinuationError, SolverError) as exc:
            return None, f"continuation failed: {exc}"
        return new, _check_state(base.with_gamma(g_to), new, preds)

    states = [(r.C, evaluate(base, r.C), None) for r in recs]
    g_prev = 0.0
    for g in grid:
        new, reason = attempt(states, g_prev, g)
        if reason is None:
            states, g_prev = new, float(g)
            continue
        lo, hi, lo_states, why = g_prev, float(g), states, reason
        while hi - lo > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            new, reason = attempt(lo_states, lo, mid)
            if reason is None:
                lo, lo_states = mid, new
            else:
                hi, why = mid, reason
        return GammaStar(hi, False, why)
    return GammaStar(float(gamma_max), True, "no departure up to gamma_max")
