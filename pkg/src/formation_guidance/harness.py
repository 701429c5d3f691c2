"""Scenario assembly, closed-loop simulation, and comparative reporting.

A Scenario bundles the believed chief model the controller designs
against, the truth plant (nonlinear relative dynamics, optionally J2,
optionally a different chief for uncertainty studies), the initial and
desired formations, and a controller selection.  run_scenario drives
the chosen controller against the truth plant on a fixed grid and
computes the standard metrics; compare assembles grids of runs into
CSV / aligned-text reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import nnlqr
from .dynamics import (
    ChiefOrbit,
    FormationParams,
    GravityModel,
    RelativePlant,
    chief_kinematics,
    formation_to_hill,
    formation_to_hill_deriv,
    propagate_nu,
)
from .gmpsp import gmpsp_solve
from .lqr import DEFAULT_Q, DEFAULT_R, design_lqr, lqr_tracking_control
from .mpsp import MpspConfig, mpsp_solve
from .numerics import rk4_step
from .sdre import FiniteHorizonSpec, SdcModel, finite_time_sdre_control, sdre_infinite_control

#: Sentinel returned by settle_time when the error never stays inside the band.
NOT_SETTLED = math.inf

POSITION_ROWS = (0, 2, 4)

CONTROLLER_KINDS = ("zero", "lqr", "sdre", "fsdre", "mpsp", "gmpsp", "nnlqr")


class HarnessError(RuntimeError):
    """Raised for invalid scenarios or failures inside a simulation run."""


@dataclass(frozen=True)
class ControllerSpec:
    """Controller selection plus kind-specific options.

    Recognized options by kind:
      lqr:   Q, R (weight matrices)
      sdre:  Q, R, variant ("SDC1"/"SDC2"), series_order
      fsdre: Q, R, variant, series_order
      mpsp:  R, tol_rho_pct, max_iter
      gmpsp: R, tol_rho_pct, max_iter
      nnlqr: Q, R, R1, k_tau, beta, gamma, theta

    Feedback kinds also accept open_loop (bool): plan the control history
    closed-loop on the believed, unperturbed model, then apply it to the
    truth plant without further measurement.
    """

    kind: str
    options: Mapping = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in CONTROLLER_KINDS:
            raise HarnessError(f"unknown controller kind {self.kind!r}")

    def get(self, key, default=None):
        return self.options.get(key, default)


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation experiment.

    chief is the believed chief orbit used for control design; when
    truth_chief is set the plant flies that orbit instead (uncertainty
    studies).  gravity applies to the truth plant.
    """

    chief: ChiefOrbit
    gravity: GravityModel
    initial: FormationParams
    desired: FormationParams
    tf: float
    dt: float
    controller: ControllerSpec
    truth_chief: ChiefOrbit | None = None

    def __post_init__(self) -> None:
        if self.tf <= 0.0 or self.dt <= 0.0:
            raise HarnessError("tf and dt must be positive")
        steps = self.tf / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise HarnessError("tf must be an integral number of dt steps")

    @property
    def n_steps(self) -> int:
        return round(self.tf / self.dt)

    @property
    def plant_chief(self) -> ChiefOrbit:
        return self.truth_chief if self.truth_chief is not None else self.chief


@dataclass
class RunResult:
    """Trajectory, control history and metrics from one scenario run."""

    time: np.ndarray  # (N+1,)
    states: np.ndarray  # (N+1, 6)
    controls: np.ndarray  # (N+1, 3), last row repeats the final held control
    terminal_errors: np.ndarray  # (6,)
    rho_error_pct: float
    control_effort: float
    settle_time: float
    log: list[dict] = field(default_factory=list)


def control_effort(controls: np.ndarray, dt: float) -> float:
    """Trapezoidal integral of U^T U over the run."""
    u2 = np.einsum("ij,ij->i", controls, controls)
    return float(np.trapezoid(u2, dx=dt))


def desired_trajectory(
    scenario: Scenario, times: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Commanded states and their time derivatives on the grid."""
    omega = scenario.chief.mean_motion()
    Xd = np.array([formation_to_hill(scenario.desired, omega, t) for t in times])
    Xd_dot = np.array(
        [formation_to_hill_deriv(scenario.desired, omega, t) for t in times]
    )
    return Xd, Xd_dot


def settle_time(
    times: np.ndarray,
    states: np.ndarray,
    desired: np.ndarray,
    rho_command: float,
    threshold_pct: float = 1.0,
) -> float:
    """First time after which the position-error norm stays inside the band.

    The band is threshold_pct percent of the commanded baseline length
    rho_command.  Returns 0.0 when the whole trajectory is inside and
    NOT_SETTLED when the final sample is still outside.
    """
    if threshold_pct <= 0.0:
        raise HarnessError("threshold_pct must be positive")
    err = np.linalg.norm((states - desired)[:, POSITION_ROWS], axis=1)
    band = threshold_pct / 100.0 * rho_command
    outside = np.flatnonzero(err >= band)
    if outside.size == 0:
        return 0.0
    last = outside[-1]
    if last == len(times) - 1:
        return NOT_SETTLED
    return float(times[last + 1])


def _feedback_law(
    scenario: Scenario,
) -> Callable[[float, np.ndarray, np.ndarray, np.ndarray], np.ndarray]:
    """Per-step control callable for the feedback controller kinds."""
    spec = scenario.controller
    believed = scenario.chief
    omega = believed.mean_motion()
    Q = np.asarray(spec.get("Q", DEFAULT_Q), dtype=float)
    R = np.asarray(spec.get("R", DEFAULT_R), dtype=float)

    if spec.kind == "zero":
        return lambda t, X, Xd, Xd_dot: np.zeros(3)

    if spec.kind == "lqr":
        design = design_lqr(omega, Q=Q, R=R)
        return lambda t, X, Xd, Xd_dot: lqr_tracking_control(design, X, Xd, Xd_dot)

    model = SdcModel(
        variant=spec.get("variant", "SDC1"),
        series_order=int(spec.get("series_order", 4)),
    )
    # Believed chief kinematics on the control grid.
    nus = propagate_nu(believed, 0.0, scenario.tf, scenario.dt)

    if spec.kind == "sdre":
        def sdre_law(t, X, Xd, Xd_dot):
            kin = chief_kinematics(believed, nus[round(t / scenario.dt)])
            return sdre_infinite_control(X, Xd, model, kin, Q, R)

        return sdre_law

    if spec.kind == "fsdre":
        Xf = formation_to_hill(scenario.desired, omega, scenario.tf)
        horizon = FiniteHorizonSpec(
            tf=scenario.tf, Xf=Xf, Q=spec.get("Q", np.zeros((6, 6))), R=R
        )

        def fsdre_law(t, X, Xd, Xd_dot):
            kin = chief_kinematics(believed, nus[round(t / scenario.dt)])
            return finite_time_sdre_control(X, t, horizon, model, kin)

        return fsdre_law

    raise HarnessError(f"no feedback law for controller kind {spec.kind!r}")


def _run_feedback(scenario: Scenario, plant: RelativePlant) -> tuple[np.ndarray, np.ndarray, list[dict]]:
    law = _feedback_law(scenario)
    n, dt = scenario.n_steps, scenario.dt
    omega = scenario.chief.mean_motion()
    states = np.zeros((n + 1, 6))
    controls = np.zeros((n + 1, 3))
    aug = np.append(formation_to_hill(scenario.initial, omega, 0.0), plant.orbit.nu0)
    states[0] = aug[:6]
    u = np.zeros(3)
    for k in range(n):
        t = k * dt
        Xd = formation_to_hill(scenario.desired, omega, t)
        Xd_dot = formation_to_hill_deriv(scenario.desired, omega, t)
        try:
            u = law(t, aug[:6], Xd, Xd_dot)
        except Exception as exc:
            raise HarnessError(f"controller failed at step {k} (t={t}): {exc}") from exc
        controls[k] = u
        aug = rk4_step(lambda tt, a: plant.deriv(tt, a, u), t, aug, dt)
        states[k + 1] = aug[:6]
    controls[n] = controls[n - 1] if n else 0.0
    return states, controls, []


def _run_nnlqr(scenario: Scenario, plant: RelativePlant) -> tuple[np.ndarray, np.ndarray, list[dict]]:
    spec = scenario.controller
    believed = scenario.chief
    omega = believed.mean_motion()
    n, dt = scenario.n_steps, scenario.dt
    Q = np.asarray(spec.get("Q", DEFAULT_Q), dtype=float)
    R = np.asarray(spec.get("R", DEFAULT_R), dtype=float)
    design = design_lqr(omega, Q=Q, R=R)
    x0 = formation_to_hill(scenario.initial, omega, 0.0)
    rbf = spec.get("rbf")
    if rbf is None:
        rbf = nnlqr.make_rbf_network(scenario.desired.rho, omega)
    ctrl = nnlqr.NnLqrController(
        design=design,
        rbf=rbf,
        dist=nnlqr.DisturbanceNet(nnlqr.build_disturbance_basis(believed.a)),
        vp=nnlqr.VirtualPlant(
            X_a=x0.copy(), K_tau=float(spec.get("k_tau", 0.1)) * np.eye(6)
        ),
        gains=nnlqr.AdaptationGains(
            beta=float(spec.get("beta", 1e-2)),
            gamma=float(spec.get("gamma", 100.0)),
            Theta=float(spec.get("theta", 1.0)) * np.eye(6),
        ),
        R1=float(spec.get("R1", 1.0)),
        dt=dt,
    )
    states = np.zeros((n + 1, 6))
    controls = np.zeros((n + 1, 3))
    aug = np.append(x0, scenario.plant_chief.nu0)
    states[0] = aug[:6]
    for k in range(n):
        t = k * dt
        theta = believed.arg_perigee + believed.nu0 + omega * t
        try:
            u = nnlqr.nnlqr_control_step(
                ctrl,
                aug[:6],
                formation_to_hill(scenario.desired, omega, t),
                formation_to_hill_deriv(scenario.desired, omega, t),
                formation_to_hill(scenario.desired, omega, t + dt),
                theta,
            )
        except Exception as exc:
            raise HarnessError(f"controller failed at step {k} (t={t}): {exc}") from exc
        controls[k] = u
        aug = rk4_step(lambda tt, a: plant.deriv(tt, a, u), t, aug, dt)
        states[k + 1] = aug[:6]
    controls[n] = controls[n - 1] if n else 0.0
    return states, controls, []


def _replay(scenario: Scenario, plant: RelativePlant, controls: np.ndarray) -> np.ndarray:
    """Propagate the truth plant under a fixed zero-order-hold control history."""
    n, dt = scenario.n_steps, scenario.dt
    omega = scenario.chief.mean_motion()
    states = np.zeros((n + 1, 6))
    aug = np.append(formation_to_hill(scenario.initial, omega, 0.0), plant.orbit.nu0)
    states[0] = aug[:6]
    for k in range(n):
        u = controls[k]
        aug = rk4_step(lambda tt, a: plant.deriv(tt, a, u), k * dt, aug, dt)
        states[k + 1] = aug[:6]
    return states


def _run_open_loop(scenario: Scenario, plant: RelativePlant) -> tuple[np.ndarray, np.ndarray, list[dict]]:
    spec = scenario.controller
    omega = scenario.chief.mean_motion()
    n, dt = scenario.n_steps, scenario.dt
    x0 = formation_to_hill(scenario.initial, omega, 0.0)
    Y_star = formation_to_hill(scenario.desired, omega, scenario.tf)
    guess = spec.get("guess")
    if guess is None:
        guess = _lqr_guess(scenario, plant)
    R = np.asarray(spec.get("R", 1e9 * np.eye(3)), dtype=float)
    max_iter = int(spec.get("max_iter", 10))
    if spec.kind == "mpsp":
        config = MpspConfig(
            dt=dt,
            R_l=R,
            tol_rho_pct=float(spec.get("tol_rho_pct", 0.5)),
            max_iter=max_iter,
        )
        U, log, states = mpsp_solve(plant, x0, Y_star, config, guess)
    else:
        U, log, states = gmpsp_solve(
            plant,
            x0,
            Y_star,
            guess,
            dt,
            R=R,
            tol_rho_pct=float(spec.get("tol_rho_pct", 1.0)),
            max_iter=max_iter,
        )
    controls = np.vstack([U, U[-1]])
    return states, controls, log


def _lqr_guess(scenario: Scenario, plant: RelativePlant) -> np.ndarray:
    """Closed-loop LQR control history used to seed the iterative solvers."""
    seed = Scenario(
        chief=scenario.chief,
        gravity=scenario.gravity,
        initial=scenario.initial,
        desired=scenario.desired,
        tf=scenario.tf,
        dt=scenario.dt,
        controller=ControllerSpec("lqr"),
        truth_chief=scenario.truth_chief,
    )
    _, controls, _ = _run_feedback(seed, plant)
    return controls[:-1]


def run_scenario(scenario: Scenario, settle_threshold_pct: float = 1.0) -> RunResult:
    """Simulate one scenario and compute its metrics."""
    plant = RelativePlant(scenario.plant_chief, scenario.gravity)
    if scenario.controller.kind in ("mpsp", "gmpsp"):
        states, controls, log = _run_open_loop(scenario, plant)
    elif scenario.controller.kind == "nnlqr":
        states, controls, log = _run_nnlqr(scenario, plant)
    elif scenario.controller.get("open_loop", False):
        # Plan closed-loop against the believed, unperturbed model, then
        # replay the resulting control history on the truth plant.  This
        # matches how guess/comparison control histories are evaluated in
        # the predictive-guidance studies.
        plan_plant = RelativePlant(scenario.chief, GravityModel(j2_enabled=False))
        _, controls, log = _run_feedback(scenario, plan_plant)
        states = _replay(scenario, plant, controls)
    else:
        states, controls, log = _run_feedback(scenario, plant)
    n, dt = scenario.n_steps, scenario.dt
    times = np.arange(n + 1) * dt
    desired, _ = desired_trajectory(scenario, times)
    terminal_errors = states[-1] - desired[-1]
    rho_f = np.linalg.norm(states[-1][list(POSITION_ROWS)])
    rho_d = np.linalg.norm(desired[-1][list(POSITION_ROWS)])
    return RunResult(
        time=times,
        states=states,
        controls=controls,
        terminal_errors=terminal_errors,
        rho_error_pct=abs(rho_f - rho_d) / rho_d * 100.0,
        control_effort=control_effort(controls, dt),
        settle_time=settle_time(
            times, states, desired, scenario.desired.rho, settle_threshold_pct
        ),
        log=log,
    )


# ---------------------------------------------------------------------------
# Report generation


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_trajectory_csv(path, result: RunResult) -> None:
    header = "t,x,xdot,y,ydot,z,zdot,ux,uy,uz"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for i in range(len(result.time)):
            row = [result.time[i], *result.states[i], *result.controls[i]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


METRIC_COLUMNS = (
    "ex",
    "exdot",
    "ey",
    "eydot",
    "ez",
    "ezdot",
    "rho_error_pct",
    "control_effort",
    "settle_time",
)


def metrics_row(result: RunResult) -> list[float]:
    return [
        *result.terminal_errors,
        result.rho_error_pct,
        result.control_effort,
        result.settle_time,
    ]


def write_metrics_csv(path, named_results: Sequence[tuple[str, RunResult]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("name," + ",".join(METRIC_COLUMNS) + "\n")
        for name, result in named_results:
            fh.write(name + "," + ",".join(_fmt(v) for v in metrics_row(result)) + "\n")


def write_iteration_log_csv(path, result: RunResult) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,ex,exdot,ey,eydot,ez,ezdot,rho_error_pct,converged\n")
        for row in result.log:
            vals = [row["iteration"], *row["terminal_errors"], row["rho_error_pct"]]
            fh.write(
                ",".join(
                    [str(int(vals[0]))]
                    + [_fmt(v) for v in vals[1:]]
                    + [str(int(row["converged"]))]
                )
                + "\n"
            )


@dataclass
class CompareCell:
    scenario_name: str
    controller_name: str
    result: RunResult | None
    error: str | None = None


def compare(
    scenarios: Sequence[tuple[str, Scenario]],
    controllers: Sequence[tuple[str, ControllerSpec]],
    settle_threshold_pct: float = 1.0,
) -> list[CompareCell]:
    """Run every scenario with every controller; failures become cells.

    The scenario's own controller spec is replaced by each entry of
    controllers in turn.  Cells are emitted in (scenario, controller)
    order, deterministically.
    """
    if not scenarios or not controllers:
        raise HarnessError("compare needs at least one scenario and controller")
    cells: list[CompareCell] = []
    for s_name, scenario in scenarios:
        for c_name, spec in controllers:
            cell_scn = Scenario(
                chief=scenario.chief,
                gravity=scenario.gravity,
                initial=scenario.initial,
                desired=scenario.desired,
                tf=scenario.tf,
                dt=scenario.dt,
                controller=spec,
                truth_chief=scenario.truth_chief,
            )
            try:
                result = run_scenario(cell_scn, settle_threshold_pct)
                cells.append(CompareCell(s_name, c_name, result))
            except Exception as exc:
                cells.append(CompareCell(s_name, c_name, None, error=str(exc)))
    return cells


def write_compare_csv(path, cells: Sequence[CompareCell]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scenario,controller,status," + ",".join(METRIC_COLUMNS) + "\n")
        for cell in cells:
            if cell.result is None:
                fh.write(f"{cell.scenario_name},{cell.controller_name},error\n")
            else:
                fh.write(
                    f"{cell.scenario_name},{cell.controller_name},ok,"
                    + ",".join(_fmt(v) for v in metrics_row(cell.result))
                    + "\n"
                )


def format_compare_table(cells: Sequence[CompareCell]) -> str:
    """Aligned text table of terminal errors, one row per cell."""
    headers = ["scenario", "controller", "ex", "ey", "ez", "rho_err_pct", "effort"]
    rows = [headers]
    for cell in cells:
        if cell.result is None:
            rows.append([cell.scenario_name, cell.controller_name, "error:", cell.error or "", "", "", ""])
            continue
        e = cell.result.terminal_errors
        rows.append(
            [
                cell.scenario_name,
                cell.controller_name,
                f"{e[0]:.6g}",
                f"{e[2]:.6g}",
                f"{e[4]:.6g}",
                f"{cell.result.rho_error_pct:.6g}",
                f"{cell.result.control_effort:.6g}",
            ]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = ["  ".join(r[i].ljust(widths[i]) for i in range(len(headers))).rstrip() for r in rows]
    return "\n".join(lines) + "\n"
