"""Discrete double-bracket gradient flow on Sym(n, p).

The continuous flow ``dC/dt = gamma [C, [C, M]]`` is integrated by exact
retraction steps along the gradient generator with Armijo backtracking.

Cost differences between neighbouring points are computed from the
Sylvester equation satisfied by ``K' - K``::

    (A - gamma C' K)^T D + D (A - gamma C' K') = gamma K (C' - C) K

so that line-search decisions stay meaningful after ``J`` itself has
converged to rounding level.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ClassificationError, InputError, SolverError, StagnationError
from .extremal import ExtremalRecord, _signature_of, signature_formula
from .isospectral import Projector, principal_angles, retract
from .objective import evaluate, hessian_matrix
from .densela import sym_eig

MAX_HALVINGS = 40


@dataclass(frozen=True)
class FlowOptions:
    initial_step: float = 0.1
    grad_tol: float = 1e-8
    max_iters: int = 5000
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4

    def __post_init__(self):
        for name in ("initial_step", "grad_tol", "max_iters", "armijo_c"):
            if not getattr(self, name) > 0:
                raise InputError(f"FlowOptions.{name} must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise InputError("backtrack_factor must lie in (0, 1)")


@dataclass
class FlowTrace:
    """Iterates are ``(iteration, J, ||[C, M]||, step)`` tuples."""

    iterates: list = field(default_factory=list)
    final_C: Projector = None
    converged: bool = False
    descent_sign: int = -1
    final_J: float = float("nan")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "J", "grad_norm", "step"])
        for it, J, g, h in self.iterates:
            w.writerow([it, repr(float(J)), repr(float(g)), repr(float(h))])
        return buf.getvalue()

    def summary(self):
        return {
            "iterations": len(self.iterates) - 1,
            "converged": self.converged,
            "descent_sign": self.descent_sign,
            "final_J": self.final_J,
            "final_grad_norm": self.iterates[-1][2] if self.iterates else None,
            "final_C": self.final_C.C.tolist() if self.final_C is not None else None,
        }

    def to_json(self):
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def cost_difference(problem, ev_old, ev_new):
    """``J(C') - J(C)`` accurate to relative precision, not absolute."""
    A, g = problem.A, problem.gamma
    K, K2 = ev_old.K, ev_new.K
    dC = ev_new.C - ev_old.C
    if g == 0:
        return 0.0
    G = A - g * ev_new.C @ K
    F2 = A - g * ev_new.C @ K2
    D = scipy.linalg.solve_sylvester(G.T, F2, g * K @ dC @ K)
    return float(np.sum(problem.L * D))


@dataclass(frozen=True)
class StepResult:
    C: Projector
    J: float
    step: float
    ev: object
    dJ: float


def flow_step(problem, C, h, sign=-1, ev=None, opts=FlowOptions()):
    """One Armijo step of length at most ``h`` along ``sign * gamma [C, M]``.

    The accepted point satisfies ``J' <= J - armijo_c * h' * ||grad||^2``.

    Raises
    ------
    StagnationError
        After ``MAX_HALVINGS`` rejected trial steps.
    """
    if not h > 0:
        raise InputError("step must be positive")
    C = C if isinstance(C, Projector) else Projector(C, problem.p)
    ev = ev or evaluate(problem, C)
    Om = ev.grad_omega
    g2 = float(np.sum(Om * Om))
    if g2 == 0.0:
        return StepResult(C, ev.J, 0.0, ev, 0.0)
    history = []
    for _ in range(MAX_HALVINGS):
        try:
            Cn = retract(C, sign * Om, h)
            evn = evaluate(problem, Cn, K0=ev.K)
            dJ = cost_difference(problem, ev, evn)
        except SolverError:
            dJ = np.inf
        history.append(dJ)
        if dJ <= -opts.armijo_c * h * g2:
            return StepResult(Cn, ev.J + dJ, h, evn, dJ)
        h *= opts.backtrack_factor
    raise StagnationError(
        f"no Armijo decrease after {MAX_HALVINGS} halvings "
        f"(||grad||^2 = {g2:.3e}, last dJ = {history[-1]:.3e})", history)


def probe_descent_sign(problem, C, ev, h):
    """Sign ``s`` such that moving along ``s * grad`` lowers ``J``."""
    Om = ev.grad_omega
    dplus = cost_difference(problem, ev, evaluate(problem, retract(C, Om, h)))
    dminus = cost_difference(problem, ev, evaluate(problem, retract(C, -Om, h)))
    return -1 if dminus < dplus else 1


def flow_run(problem, C0, opts=FlowOptions()):
    """Integrate the descent flow from ``C0`` until ``||[C, M]|| <= grad_tol``.

    The recorded ``J`` column is accumulated from accurate cost differences
    and is nonincreasing.  At ``gamma = 0`` the gradient vanishes
    identically and the run returns immediately as converged.
    """
    C = C0 if isinstance(C0, Projector) else Projector(C0, problem.p)
    ev = evaluate(problem, C)
    trace = FlowTrace()
    J = ev.J
    trace.iterates.append((0, J, ev.bracket_norm, 0.0))
    if problem.gamma == 0 or C.dim == 0:
        trace.final_C, trace.converged, trace.final_J = C, True, J
        return trace

    h = opts.initial_step / (problem.gamma * max(np.linalg.norm(ev.M, 2), 1e-300))
    sign = None
    for it in range(1, opts.max_iters + 1):
        if ev.bracket_norm <= opts.grad_tol:
            trace.converged = True
            break
        if sign is None:
            sign = probe_descent_sign(problem, C, ev, 1e-3 * h)
            trace.descent_sign = sign
        res = flow_step(problem, C, h, sign, ev, opts)
        if not res.dJ <= 0:
            raise SolverError(f"descent sign flipped at iteration {it}")
        C, ev, J = res.C, res.ev, J + res.dJ
        trace.iterates.append((it, J, ev.bracket_norm, res.step))
        # grow again after an accepted step
        h = res.step / opts.backtrack_factor
    else:
        trace.converged = ev.bracket_norm <= opts.grad_tol
    trace.final_C, trace.final_J = C, ev.J
    return trace


def classify_limit(problem, C, tol=1e-4, ev=None):
    """Match ``C`` to the span of ``p`` eigenvectors of ``M(C)``.

    Eigenvectors are numbered 1..n in descending eigenvalue order.

    Raises
    ------
    ClassificationError
        If no subset of eigenvectors spans ``C`` within ``tol`` radians;
        the message lists the principal angles of the closest candidate.
    """
    C = C if isinstance(C, Projector) else Projector(C, problem.p)
    ev = ev or evaluate(problem, C)
    w, V = sym_eig(ev.M)
    weight = np.einsum("ij,ij->j", V, C.C @ V)
    idx = np.sort(np.argsort(-weight, kind="stable")[:C.p])
    cand = Projector.from_span(V[:, idx])
    ang = principal_angles(C, cand)
    if np.max(ang) >= tol:
        raise ClassificationError(
            f"limit matches no eigenspace of M; closest subset "
            f"{tuple(int(i) + 1 for i in idx)} has principal angles {ang}")
    one = tuple(int(i) + 1 for i in idx)
    H, _ = hessian_matrix(problem, C, ev=ev)
    return ExtremalRecord(one, C, ev.J, _signature_of(H),
                          signature_formula(one, problem.n, problem.p),
                          problem.gamma, ev.K)
