import numpy as np
import pytest

from sensoropt.densela import lyapunov_solve, random_spd, random_stable
from sensoropt.errors import InputError, InstabilityError
from sensoropt.experiments import random_unit_sensor, rule_of_thumb_sensor
from sensoropt.flow import flow_run
from sensoropt.isospectral import projector_from_sensor, sensor_from_projector
from sensoropt.kalmansim import SimConfig, compare_sensors, filter_riccati, simulate_error_cov
from sensoropt.objective import SensorProblem, cost_J
from sensoropt.rng import stream

DIAG = dict(A=np.diag([-1.0, -2.0]), G=np.eye(2), c=[[1.0, 0.0]])


class TestFilterRiccati:
    def test_scalar(self):
        assert filter_riccati([[-1.0]], [[1.0]], [[3.0]], 1.0).P[0, 0] == pytest.approx(1.0)

    def test_gamma0_open_loop(self):
        A = random_stable(3, -0.5, 1)
        Qn = random_spd(3, stream(1))
        assert np.allclose(filter_riccati(A, np.eye(3), Qn, 0.0).P, lyapunov_solve(A, Qn))

    def test_residual(self):
        A = random_stable(3, -0.5, 2)
        Qn = random_spd(3, stream(2))
        C = np.diag([1.0, 0.0, 0.0])
        P = filter_riccati(A, C, Qn, 0.8).P
        assert np.linalg.norm(A @ P + P @ A.T - 0.8 * P @ C @ P + Qn) < 1e-10
        assert np.max(np.linalg.eigvals(A.T - 0.8 * C @ P).real) < 0

    def test_singular_noise_regularized(self):
        fr = filter_riccati(np.diag([-1.0, -2.0]), np.eye(2), np.diag([1.0, 0.0]), 1.0)
        assert fr.regularization == 1e-10

    def test_is_design_riccati_on_transpose(self):
        A = random_stable(4, -0.5, 3)
        c = random_unit_sensor(4, 1, 3)
        pr = SensorProblem(A.T, np.eye(4), np.eye(4), 0.6, 1)
        P = filter_riccati(A, c.T @ c, np.eye(4), 0.6).P
        assert np.trace(P) == pytest.approx(cost_J(pr, c.T @ c), rel=1e-12)


class TestConfig:
    def test_dt_guard(self):
        with pytest.raises(InputError, match="dt"):
            SimConfig(gamma=1.0, dt=0.1, **DIAG)

    def test_horizon_guard(self):
        with pytest.raises(InputError, match="horizon"):
            SimConfig(gamma=1.0, horizon=5.0, **DIAG)


class TestSimulation:
    def test_no_measurement_limit(self):
        res = simulate_error_cov(SimConfig(gamma=0.0, seed=3, **DIAG))
        assert res.theoretical_trace == pytest.approx(0.75)
        assert res.relative_error < 0.05

    def test_deterministic_and_path_count_independent(self):
        base = dict(gamma=1.0, horizon=40.0, dt=2e-3, seed=5, **DIAG)
        a = simulate_error_cov(SimConfig(n_paths=4, **base))
        b = simulate_error_cov(SimConfig(n_paths=4, **base))
        c = simulate_error_cov(SimConfig(n_paths=6, **base))
        assert np.array_equal(a.path_traces, b.path_traces)
        assert np.array_equal(a.empirical_cov, b.empirical_cov)
        assert np.array_equal(a.path_traces, c.path_traces[:4])

    def test_stderr_shrinks_with_paths(self):
        base = dict(gamma=1.0, horizon=20.0, dt=2e-3, seed=6, **DIAG)
        small = simulate_error_cov(SimConfig(n_paths=32, **base))
        large = simulate_error_cov(SimConfig(n_paths=128, **base))
        assert 1.3 < small.stderr / large.stderr < 3.0

    def test_blowup(self):
        cfg = SimConfig(A=[[-0.1]], G=[[1.0]], c=[[1.0]], gamma=100.0, seed=1,
                        innovation_sign=-1)
        with pytest.raises(InstabilityError, match="exceeded"):
            simulate_error_cov(cfg)

    def test_more_sensing_reduces_error(self):
        base = dict(horizon=60.0, dt=2e-3, n_paths=32, seed=9, **DIAG)
        lo = simulate_error_cov(SimConfig(gamma=0.2, **base))
        hi = simulate_error_cov(SimConfig(gamma=2.0, **base))
        assert hi.empirical_trace <= lo.empirical_trace + 3 * np.hypot(hi.stderr, lo.stderr)


class TestCompareSensors:
    def test_identical_sensors(self):
        rows = compare_sensors(DIAG["A"], DIAG["G"], 1.0, [DIAG["c"], DIAG["c"]],
                               horizon=20.0, n_paths=8, dt=2e-3)
        assert rows[0]["theoretical"] == rows[1]["theoretical"]
        assert rows[0]["empirical"] == rows[1]["empirical"]

    def test_random_sensor_worse_than_rule_of_thumb(self):
        n, g = 4, 1.0
        A = random_stable(n, -0.5, 17)
        I = np.eye(n)
        # the filter problem for drift A is the design problem for A^T
        pr = SensorProblem(A.T, I, I, g, 1)
        c0 = rule_of_thumb_sensor(A.T, I, I, 1)
        tr = flow_run(pr, projector_from_sensor(c0))
        cstar = sensor_from_projector(tr.final_C)
        cr = random_unit_sensor(n, 1, 17, 1)
        rows = compare_sensors(A, I, g, [cstar, c0, cr], horizon=120.0, n_paths=16, dt=2e-3)
        ratio = {r["sensor"]: r["ratio"] for r in rows}
        assert ratio[0] == 1.0
        assert ratio[2] > ratio[1] >= 1.0
        # empirical ordering agrees with theory within sampling error
        by_emp = sorted(rows, key=lambda r: r["empirical"])
        for a, b in zip(by_emp, by_emp[1:]):
            if a["theoretical"] > b["theoretical"]:
                assert a["empirical"] + 3 * a["stderr"] >= b["empirical"] - 3 * b["stderr"]
