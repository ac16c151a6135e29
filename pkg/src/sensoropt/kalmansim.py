"""Monte Carlo check of steady-state Kalman-Bucy error covariances.

The plant and measurement are

    dx = A x dt + G dW,        dy = sqrt(gamma) c x dt + dV,

and the filter runs ``dxh = A xh dt + P c^T sqrt(gamma) (dy - sqrt(gamma) c xh
dt)`` with ``P`` the stabilizing solution of
``A P + P A^T - gamma P C P + G G^T = 0``, ``C = c^T c``.  In steady state
the error covariance equals ``P``.

This filter equation is the design Riccati equation with ``A`` replaced by
``A^T``: ``J`` for drift ``A^T`` is ``tr(L P)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .densela import as_square, care_solve, is_stable
from .errors import InputError, InstabilityError, SolverError
from .rng import stream

#: Regularization added to ``G G^T`` when it is singular.
REG_EPS = 1e-10
#: Error norm that counts as a blow-up.
BLOWUP = 1e8
#: Steps drawn per random-number chunk.
CHUNK = 4096


@dataclass(frozen=True)
class FilterRiccati:
    P: np.ndarray
    regularization: float


def filter_riccati(A, C, Qn, gamma):
    """Stabilizing ``P`` with ``A P + P A^T - gamma P C P + Qn = 0``.

    A singular ``Qn`` is shifted by ``REG_EPS * I``; the shift is returned.
    """
    A = as_square(A, "A")
    Qn = np.asarray(Qn, dtype=float)
    eps = 0.0
    if np.linalg.eigvalsh(0.5 * (Qn + Qn.T))[0] <= 0:
        eps = REG_EPS
        Qn = Qn + eps * np.eye(len(Qn))
    sol = care_solve(A.T, C, Qn, gamma)
    return FilterRiccati(sol.K, eps)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Euler-Maruyama settings.

    ``innovation_sign = -1`` reproduces a sign-flipped innovation gain and
    exists only as a negative control.
    """

    A: np.ndarray
    G: np.ndarray
    c: np.ndarray
    gamma: float
    dt: float = 1e-3
    horizon: float = 200.0
    n_paths: int = 64
    burn_in: float = 0.25
    seed: int = 0
    innovation_sign: int = 1

    def __post_init__(self):
        A = as_square(self.A, "A")
        stable, margin = is_stable(A)
        if not stable:
            raise InputError("A must be stable")
        G = np.array(self.G, dtype=float, ndmin=2)
        c = np.array(self.c, dtype=float, ndmin=2)
        if G.shape[0] != len(A) or c.shape[1] != len(A):
            raise InputError("G must have n rows and c n columns")
        if not self.gamma >= 0:
            raise InputError("gamma must be nonnegative")
        if not self.dt * np.linalg.norm(A, 2) < 0.1:
            raise InputError(f"dt * ||A|| = {self.dt * np.linalg.norm(A, 2):.3g}"
                             " must be below 0.1")
        if self.horizon < 20.0 / margin:
            raise InputError(f"horizon {self.horizon} is shorter than "
                             f"20 / margin = {20.0 / margin:.3g}")
        if not 0 <= self.burn_in < 1:
            raise InputError("burn_in must lie in [0, 1)")
        if self.n_paths < 2:
            raise InputError("need at least two paths")
        if self.innovation_sign not in (1, -1):
            raise InputError("innovation_sign must be +1 or -1")
        for name, val in (("A", A), ("G", G), ("c", c)):
            object.__setattr__(self, name, val)

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))


@dataclass(eq=False)
class SimResult:
    empirical_cov: np.ndarray
    empirical_trace: float
    theoretical_trace: float
    stderr: float
    path_traces: np.ndarray
    regularization: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def relative_error(self):
        return abs(self.empirical_trace - self.theoretical_trace) / self.theoretical_trace

    def to_dict(self):
        return {
            "empirical_trace": self.empirical_trace,
            "theoretical_trace": self.theoretical_trace,
            "relative_error": self.relative_error,
            "stderr": self.stderr,
            "empirical_cov": self.empirical_cov.tolist(),
            "regularization": self.regularization,
        }


def simulate_error_cov(cfg, L=None):
    """Co-simulate plant and filter and average ``e e^T`` after burn-in.

    Each path draws from its own counter-based stream keyed on
    ``(seed, path)``, so results do not depend on how many paths run.

    Returns
    -------
    SimResult
        ``*_trace`` values are ``tr(L Sigma)`` (``L = I`` by default).

    Raises
    ------
    InstabilityError
        If the estimation error exceeds ``BLOWUP``.
    """
    A, G, c, g = cfg.A, cfg.G, cfg.c, cfg.gamma
    n, r, p = len(A), G.shape[1], c.shape[0]
    L = np.eye(n) if L is None else np.asarray(L, dtype=float)
    try:
        fr = filter_riccati(A, c.T @ c, G @ G.T, g)
    except SolverError as exc:
        raise InstabilityError(f"filter Riccati failed: {exc}") from exc
    sg = np.sqrt(g)
    gain = cfg.innovation_sign * sg * fr.P @ c.T      # n x p
    dt, sdt = cfg.dt, np.sqrt(cfg.dt)
    steps = cfg.n_steps
    start = int(cfg.burn_in * steps)
    m = cfg.n_paths
    rngs = [stream(cfg.seed, k) for k in range(m)]

    x = np.zeros((m, n))
    xh = np.zeros((m, n))
    acc = np.zeros((m, n, n))
    At, Gt, ct, Kt = A.T, G.T, c.T, gain.T
    done = 0
    while done < steps:
        k = min(CHUNK, steps - done)
        noise = np.stack([rg.standard_normal((k, r + p)) for rg in rngs], axis=1)
        noise *= sdt
        for s in range(k):
            dW = noise[s, :, :r]
            dV = noise[s, :, r:]
            dy = sg * (x @ ct) * dt + dV
            innov = dy - sg * (xh @ ct) * dt
            x = x + (x @ At) * dt + dW @ Gt
            xh = xh + (xh @ At) * dt + innov @ Kt
            if done + s >= start:
                e = x - xh
                acc += e[:, :, None] * e[:, None, :]
        done += k
        if not np.all(np.isfinite(x - xh)) or np.max(np.abs(x - xh)) > BLOWUP:
            raise InstabilityError(f"estimation error exceeded {BLOWUP:.0e} "
                                   f"by step {done}")
    covs = acc / (steps - start)
    traces = np.einsum("ij,kji->k", L, covs)
    emp = covs.mean(axis=0)
    return SimResult(
        empirical_cov=0.5 * (emp + emp.T),
        empirical_trace=float(traces.mean()),
        theoretical_trace=float(np.sum(L * fr.P)),
        stderr=float(traces.std(ddof=1) / np.sqrt(m)),
        path_traces=traces,
        regularization=fr.regularization,
    )


def compare_sensors(A, G, gamma, sensors, L=None, **sim_kwargs):
    """Simulate each sensor and rank them by theoretical ``tr(L P)``.

    Returns a list of dicts sorted by ``theoretical``, each with the
    sensor's position in ``sensors``, both traces, the standard error and the
    ratio to the best theoretical value.
    """
    rows = []
    for i, c in enumerate(sensors):
        cfg = SimConfig(A, G, c, gamma, **sim_kwargs)
        res = simulate_error_cov(cfg, L)
        rows.append({"sensor": i, "theoretical": res.theoretical_trace,
                     "empirical": res.empirical_trace, "stderr": res.stderr})
    rows.sort(key=lambda d: d["theoretical"])
    best = rows[0]["theoretical"]
    for d in rows:
        d["ratio"] = d["theoretical"] / best
    return rows
