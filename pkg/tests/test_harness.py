import math

import numpy as np
import pytest

from formation_guidance.dynamics import ChiefOrbit, FormationParams, GravityModel
from formation_guidance.harness import (
    NOT_SETTLED,
    CompareCell,
    ControllerSpec,
    HarnessError,
    RunResult,
    Scenario,
    compare,
    control_effort,
    desired_trajectory,
    format_compare_table,
    metrics_row,
    run_scenario,
    settle_time,
    write_compare_csv,
    write_iteration_log_csv,
    write_metrics_csv,
    write_trajectory_csv,
)

CIRC = ChiefOrbit(a=10000.0)
OMEGA = CIRC.mean_motion()
RING = FormationParams(rho=5.0, theta=math.radians(30.0), m_slope=1.0)


def _natural_scenario(controller="zero", tf=600.0, dt=1.0, **options):
    return Scenario(
        chief=CIRC,
        gravity=GravityModel(),
        initial=RING,
        desired=RING,
        tf=tf,
        dt=dt,
        controller=ControllerSpec(controller, options),
    )


class TestScenarioValidation:
    def test_non_integral_grid_rejected(self):
        with pytest.raises(HarnessError):
            _natural_scenario(tf=100.5, dt=1.0)

    def test_nonpositive_times_rejected(self):
        with pytest.raises(HarnessError):
            _natural_scenario(tf=-1.0)

    def test_unknown_controller_rejected(self):
        with pytest.raises(HarnessError):
            ControllerSpec("pid")


class TestRunScenario:
    def test_zero_control_on_natural_orbit(self):
        # A periodic ring with desired = initial needs no control: the
        # nonlinear truth plant stays within its own model error.
        result = run_scenario(_natural_scenario())
        assert result.control_effort == 0.0
        assert np.linalg.norm(result.terminal_errors[[0, 2, 4]]) < 5e-3
        assert result.settle_time == 0.0

    def test_determinism_bit_identical(self):
        a = run_scenario(_natural_scenario("lqr", tf=300.0))
        b = run_scenario(_natural_scenario("lqr", tf=300.0))
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.controls, b.controls)
        assert metrics_row(a) == metrics_row(b)

    def test_rho_error_pct_recomputed_from_terminal_state(self):
        result = run_scenario(_natural_scenario("lqr", tf=300.0))
        rho_f = np.linalg.norm(result.states[-1][[0, 2, 4]])
        times = result.time
        scn = _natural_scenario("lqr", tf=300.0)
        desired, _ = desired_trajectory(scn, times)
        rho_d = np.linalg.norm(desired[-1][[0, 2, 4]])
        assert abs(result.rho_error_pct - abs(rho_f - rho_d) / rho_d * 100.0) < 1e-12

    def test_grids_aligned(self):
        result = run_scenario(_natural_scenario(tf=120.0, dt=2.0))
        assert len(result.time) == len(result.states) == len(result.controls) == 61
        np.testing.assert_allclose(np.diff(result.time), 2.0)


class TestControlEffort:
    def test_zero_history(self):
        assert control_effort(np.zeros((50, 3)), 1.0) == 0.0

    def test_constant_magnitude(self):
        # ||U||^2 = c held over T seconds integrates to c T.
        U = np.tile([3.0, 0.0, 4.0], (101, 1))  # ||U||^2 = 25
        assert control_effort(U, 0.5) == pytest.approx(25.0 * 50.0, rel=1e-14)

    def test_split_additivity(self):
        rng = np.random.default_rng(2)
        U = rng.normal(size=(201, 3))
        whole = control_effort(U, 0.25)
        for cut in (1, 57, 100, 199):
            parts = control_effort(U[: cut + 1], 0.25) + control_effort(U[cut:], 0.25)
            assert abs(parts - whole) <= 1e-10 * whole


class TestSettleTime:
    def test_already_settled(self):
        times = np.arange(11.0)
        desired = np.zeros((11, 6))
        states = np.full((11, 6), 1e-6)
        assert settle_time(times, states, desired, rho_command=5.0) == 0.0

    def test_never_settles(self):
        times = np.arange(11.0)
        desired = np.zeros((11, 6))
        states = np.ones((11, 6))
        assert settle_time(times, states, desired, rho_command=5.0) is NOT_SETTLED

    def test_exponential_decay_crossing(self):
        # Radial error e^{-t/tau}: the band entry time is tau ln(1/thr)
        # with thr the band as a fraction of the initial error.
        tau, rho, thr_pct = 200.0, 1.0, 1.0
        dt = 0.5
        times = np.arange(0.0, 2000.0 + dt, dt)
        desired = np.zeros((len(times), 6))
        states = np.zeros((len(times), 6))
        states[:, 0] = np.exp(-times / tau)
        t_star = tau * math.log(1.0 / (thr_pct / 100.0 * rho))
        measured = settle_time(times, states, desired, rho, thr_pct)
        assert abs(measured - t_star) <= dt

    def test_nonpositive_threshold_rejected(self):
        with pytest.raises(HarnessError):
            settle_time(np.arange(3.0), np.zeros((3, 6)), np.zeros((3, 6)), 1.0, 0.0)


class TestCompare:
    def test_single_cell(self):
        cells = compare(
            [("nat", _natural_scenario(tf=120.0))],
            [("zero", ControllerSpec("zero"))],
        )
        assert len(cells) == 1
        assert cells[0].scenario_name == "nat" and cells[0].controller_name == "zero"
        assert cells[0].result is not None and cells[0].error is None

    def test_failed_cell_recorded_run_continues(self):
        # An SDC factorization failure in one cell must not abort the grid.
        far = Scenario(
            chief=CIRC,
            gravity=GravityModel(),
            initial=FormationParams(rho=9500.0),
            desired=FormationParams(rho=9500.0),
            tf=10.0,
            dt=1.0,
            controller=ControllerSpec("zero"),
        )
        cells = compare(
            [("far", far)],
            [("sdre", ControllerSpec("sdre")), ("zero", ControllerSpec("zero"))],
        )
        assert cells[0].result is None and cells[0].error
        assert cells[1].result is not None

    def test_empty_matrix_rejected(self):
        with pytest.raises(HarnessError):
            compare([], [("zero", ControllerSpec("zero"))])

    def test_repeat_invocation_identical_bytes(self, tmp_path):
        scenarios = [("nat", _natural_scenario(tf=120.0))]
        controllers = [("zero", ControllerSpec("zero")), ("lqr", ControllerSpec("lqr"))]
        paths = []
        for name in ("a.csv", "b.csv"):
            cells = compare(scenarios, controllers)
            path = tmp_path / name
            write_compare_csv(path, cells)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_table_layout(self):
        cells = compare(
            [("nat", _natural_scenario(tf=120.0))],
            [("zero", ControllerSpec("zero")), ("lqr", ControllerSpec("lqr"))],
        )
        table = format_compare_table(cells)
        lines = table.splitlines()
        assert len(lines) == 3  # header + one row per controller
        assert lines[0].split()[:2] == ["scenario", "controller"]


class TestCsvWriters:
    def test_trajectory_schema_and_precision(self, tmp_path):
        result = run_scenario(_natural_scenario(tf=10.0))
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, result)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x,xdot,y,ydot,z,zdot,ux,uy,uz"
        assert len(lines) == 12
        # 17-significant-digit round trip.
        parsed = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        np.testing.assert_array_equal(parsed[:, 1:7], result.states)

    def test_metrics_rows(self, tmp_path):
        result = run_scenario(_natural_scenario(tf=10.0))
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, [("nat", result)])
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[1].split(",")[0] == "nat"
        values = [float(v) for v in lines[1].split(",")[1:]]
        assert values == [float(v) for v in metrics_row(result)]

    def test_iteration_log(self, tmp_path):
        scn = Scenario(
            chief=ChiefOrbit(a=10000.0, e=0.15, nu0=math.radians(10.0)),
            gravity=GravityModel(),
            initial=FormationParams(rho=0.5, theta=math.radians(45.0), m_slope=1.0),
            desired=FormationParams(rho=5.0, theta=math.radians(60.0), m_slope=1.5),
            tf=2000.0,
            dt=1.0,
            controller=ControllerSpec("mpsp"),
        )
        result = run_scenario(scn)
        path = tmp_path / "iters.csv"
        write_iteration_log_csv(path, result)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("iteration,")
        assert len(lines) == len(result.log) + 1
        assert lines[-1].split(",")[-1] == "1"  # converged flag
