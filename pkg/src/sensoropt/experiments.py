"""Monte Carlo studies over random stable drift matrices.

``run_fig1`` estimates, per stability margin, the share of systems whose
extremal signatures still match the small-gamma prediction at each gamma.
``run_fig2`` compares the rule-of-thumb sensor ``c0`` (top eigenvector of
``M0``) and a random unit sensor against the flow optimum ``c*``.

Every sample draws from its own counter-based stream, so results depend only
on the configuration and ``master_seed``.
"""

import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from .densela import random_stable, sym_eig
from .errors import InputError, SensorOptError
from .extremal import gamma_star, m0_spectrum
from .flow import FlowOptions, flow_run
from .io import matrix_from_json, rows_to_csv
from .isospectral import projector_from_sensor, random_projector
from .objective import SensorProblem, evaluate

CSV_HEADER = ["experiment", "margin", "gamma", "statistic", "stderr", "n_effective"]

FIG1_GAMMAS = [0.001, 0.0031, 0.0099, 0.0309, 0.097, 0.3045, 0.9558, 3.0, 4.0,
               6.3246, 10.0]
FIG2_GAMMAS = [0.01, 0.308, 0.606, 0.904, 1.202]

# stream tags keep the two studies independent under one master seed
_TAG_FIG1, _TAG_FIG2 = 1, 2

PRESETS = {
    "identity": lambda n: np.eye(n),
    "half_identity": lambda n: 0.5 * np.eye(n),
    "identity_over_sqrt_n": lambda n: np.eye(n) / math.sqrt(n),
}


def resolve_matrix(spec, n, name):
    """Named preset or explicit matrix."""
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise InputError(f"{name}: unknown preset {spec!r}; choose from "
                             f"{sorted(PRESETS)}")
        return PRESETS[spec](n)
    M = matrix_from_json(spec, name)
    if M.shape != (n, n):
        raise InputError(f"{name}: expected {n}x{n}, got {M.shape[0]}x{M.shape[1]}")
    return M


@dataclass
class ExperimentConfig:
    """Margins are stability margins ``-max Re(lambda)``; either sign is
    accepted and normalized to positive."""

    n: int
    p: int
    Q_spec: object
    L_spec: object = "identity"
    margins: list = field(default_factory=list)
    gamma_grid: list = field(default_factory=list)
    n_samples: int = 100
    master_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, int) or not isinstance(self.p, int):
            raise InputError("n and p must be integers")
        if not 1 <= self.p <= self.n:
            raise InputError(f"need 1 <= p <= n, got n={self.n}, p={self.p}")
        if not isinstance(self.n_samples, int) or self.n_samples < 1:
            raise InputError("n_samples must be a positive integer")
        if not self.margins or any(not m for m in self.margins):
            raise InputError("margins must be a nonempty list of nonzero numbers")
        self.margins = [abs(float(m)) for m in self.margins]
        g = [float(x) for x in self.gamma_grid]
        if not g or any(x < 0 for x in g) or g != sorted(g):
            raise InputError("gamma_grid must be nonempty, nonnegative and ascending")
        self.gamma_grid = g
        self.master_seed = int(self.master_seed)
        self.Q = resolve_matrix(self.Q_spec, self.n, "Q_spec")
        self.L = resolve_matrix(self.L_spec, self.n, "L_spec")

    def to_dict(self):
        return {k: v for k, v in asdict(self).items()}

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def fig1_default(cls, n_samples=500, master_seed=0):
        return cls(4, 1, "half_identity", "identity", [3.0, 1.0, 0.5, 0.1],
                   list(FIG1_GAMMAS), n_samples, master_seed)

    @classmethod
    def fig2_default(cls, n_samples=300, master_seed=0):
        return cls(6, 1, "identity_over_sqrt_n", "identity", [0.01, 0.05, 0.1, 0.5],
                   list(FIG2_GAMMAS), n_samples, master_seed)

    def is_faithful(self, which):
        """Whether the setup is the one the reference figures used."""
        ref = {"fig1": (4, 1, 0.5 * np.eye(4)), "fig2": (6, 1, np.eye(6) / math.sqrt(6))}
        n, p, Q = ref[which]
        return (self.n, self.p) == (n, p) and np.allclose(self.Q, Q)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    margin: float
    gamma: float
    statistic: float
    stderr: float
    n_effective: int

    def __post_init__(self):
        if self.stderr < 0 or (self.experiment == "fig1"
                               and not 0 <= self.statistic <= 100):
            raise InputError(f"invalid result row {self}")


@dataclass
class RunOutput:
    rows: list
    excluded: dict
    wall_time: float
    config: ExperimentConfig
    experiment: str

    def to_csv(self):
        return rows_to_csv([asdict(r) for r in self.rows], CSV_HEADER)

    def manifest(self):
        from . import __version__
        return {
            "experiment": self.experiment,
            "config": self.config.to_dict(),
            "config_hash": self.config.digest(),
            "seed": self.config.master_seed,
            "faithful": self.config.is_faithful(self.experiment),
            "assumptions": ["L = I unless L_spec says otherwise"],
            "excluded_samples": {format(m, "g"): c for m, c in self.excluded.items()},
            "versions": {"python": platform.python_version(), "numpy": np.__version__,
                         "scipy": scipy.__version__, "artifact": __version__},
            "wall_time_s": self.wall_time,
        }


def _margin_key(margin):
    return int(round(margin * 1e9))


def sample_drift(cfg, tag, margin, s):
    return random_stable(cfg.n, -margin, cfg.master_seed, tag, _margin_key(margin), s)


def rule_of_thumb_sensor(A, Q, L, p):
    """Rows are the top ``p`` unit eigenvectors of ``M0``.

    Raises
    ------
    DegeneracyError
        If ``M0`` has a near-repeated eigenvalue.
    """
    _, V, _ = m0_spectrum(A, Q, L)
    return V[:, :p].T.copy()


def random_unit_sensor(n, p, seed, *indices):
    """Orthonormal ``p x n`` rows, uniform on the Stiefel manifold."""
    C = random_projector(n, p, seed, *indices)
    _, V = sym_eig(C.C)
    return V[:, :p].T.copy()


def _binomial_row(exp, margin, gamma, hits, total):
    f = hits / total
    return ResultRow(exp, margin, gamma, 100.0 * f,
                     100.0 * math.sqrt(f * (1 - f) / total), total)


def _mean_row(exp, margin, gamma, vals):
    v = np.asarray(vals, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return ResultRow(exp, margin, gamma, float(v.mean()), se, len(v))


def run_fig1(cfg, gamma_max=None, grid_size=24, margins=None):
    """Share of sampled systems with ``gamma < gamma*`` per (margin, gamma).

    Samples whose analysis fails are excluded and counted per margin.
    """
    t0 = time.perf_counter()
    gmax = gamma_max or max(cfg.gamma_grid[-1], 1e-3)
    rows, excluded = [], {}
    for margin in margins or cfg.margins:
        stars = []
        excluded[margin] = 0
        for s in range(cfg.n_samples):
            A = sample_drift(cfg, _TAG_FIG1, margin, s)
            try:
                stars.append(gamma_star(A, cfg.Q, cfg.L, cfg.p, gamma_max=gmax,
                                        grid_size=grid_size))
            except SensorOptError:
                excluded[margin] += 1
        for g in cfg.gamma_grid:
            hits = sum(st.exceeds(g) for st in stars)
            if stars:
                rows.append(_binomial_row("fig1", margin, g, hits, len(stars)))
    return RunOutput(rows, excluded, time.perf_counter() - t0, cfg, "fig1")


def best_flow_limit(problem, starts, opts):
    """Lowest final ``J`` over converged flows, or ``None``."""
    best = None
    for C0 in starts:
        try:
            tr = flow_run(problem, C0, opts)
        except SensorOptError:
            continue
        if tr.converged and (best is None or tr.final_J < best.final_J):
            best = tr
    return best


def fig2_sample(cfg, margin, s, n_random_starts=4):
    """Ratios ``J(c0)/J(c*)`` and ``J(c_r)/J(c*)`` on the gamma grid for one
    sample; entries are ``None`` where no flow converged."""
    A = sample_drift(cfg, _TAG_FIG2, margin, s)
    mk = _margin_key(margin)
    c0 = rule_of_thumb_sensor(A, cfg.Q, cfg.L, cfg.p)
    C0 = projector_from_sensor(c0)
    Cr = projector_from_sensor(random_unit_sensor(cfg.n, cfg.p, cfg.master_seed,
                                                  _TAG_FIG2, mk, s, 0))
    starts = [C0] + [random_projector(cfg.n, cfg.p, cfg.master_seed, _TAG_FIG2, mk, s,
                                      1 + k) for k in range(n_random_starts)]
    out = []
    for g in cfg.gamma_grid:
        pr = SensorProblem(A, cfg.Q, cfg.L, g, cfg.p)
        ev0 = evaluate(pr, C0)
        # flows stop on a bracket tolerance relative to the scale of M
        opts = FlowOptions(grad_tol=1e-8 * max(1.0, np.linalg.norm(ev0.M, 2)))
        best = best_flow_limit(pr, starts, opts)
        if best is None:
            out.append(None)
            continue
        Jstar = best.final_J
        out.append((ev0.J / Jstar, evaluate(pr, Cr).J / Jstar))
    return out


def run_fig2(cfg, margins=None, n_random_starts=4):
    """Mean cost ratios of ``c0`` and of a random sensor against ``c*``.

    Rows use experiment ids ``fig2_c0`` and ``fig2_random``.  Samples with a
    degenerate ``M0`` are excluded entirely; samples where no flow converged
    are excluded at that gamma.  Both are counted in ``excluded``.
    """
    t0 = time.perf_counter()
    rows, excluded = [], {}
    for margin in margins or cfg.margins:
        per_gamma = [[] for _ in cfg.gamma_grid]
        excluded[margin] = 0
        for s in range(cfg.n_samples):
            try:
                res = fig2_sample(cfg, margin, s, n_random_starts)
            except SensorOptError:
                excluded[margin] += 1
                continue
            for k, r in enumerate(res):
                if r is None:
                    excluded[margin] += 1
                else:
                    per_gamma[k].append(r)
        for k, g in enumerate(cfg.gamma_grid):
            if per_gamma[k]:
                r0, rr = zip(*per_gamma[k])
                rows.append(_mean_row("fig2_c0", margin, g, r0))
                rows.append(_mean_row("fig2_random", margin, g, rr))
    return RunOutput(rows, excluded, time.perf_counter() - t0, cfg, "fig2")
