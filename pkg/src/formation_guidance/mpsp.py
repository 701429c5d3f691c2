"""Model predictive static programming (discrete form).

Converts the finite-horizon guidance problem into a static program:
the plant is propagated with RK4, output sensitivities are built from
Euler-discretized analytic Jacobians by a backward recursion, and the
control history is corrected in closed form.  The outer loop repeats
prediction and correction until the terminal baseline error is inside
tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import RelativePlant

_B = np.zeros((6, 3))
_B[1, 0] = 1.0
_B[3, 1] = 1.0
_B[5, 2] = 1.0

POS = np.array([0, 2, 4])


class MpspError(RuntimeError):
    """Raised on sensitivity or update failures."""


@dataclass(frozen=True)
class MpspConfig:
    """Solver settings.

    R_l is the continuous control weight; the per-step static weight is
    R_k = dt * R_l.  Iterations stop when the terminal baseline error
    %rho_e drops below tol_rho_pct or max_iter is reached.
    """

    dt: float = 1.0
    R_l: np.ndarray = field(default_factory=lambda: 1e9 * np.eye(3))
    tol_rho_pct: float = 0.5
    max_iter: int = 10


@dataclass
class SensitivitySet:
    """Per-step output-sensitivity blocks and the static-program data."""

    B_k: np.ndarray  # (N-1, 6, 3)
    A_lambda: np.ndarray  # (6, 6), equals -sum B_k R_k^-1 B_k^T
    b_lambda: np.ndarray  # (6,)


def predict_trajectory(
    plant: RelativePlant, x0: np.ndarray, controls: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """RK4 propagation of the truth plant under the control history.

    Returns (states, nus, Y_N) where Y_N is the full terminal state.
    """
    states, nus = plant.propagate(x0, controls, dt)
    return states, nus, states[-1]


def analytic_state_jacobians(
    plant: RelativePlant, states: np.ndarray, nus: np.ndarray, dt: float
) -> tuple[np.ndarray, np.ndarray]:
    """Euler-discretized transition Jacobians along a trajectory.

    dF_k/dX_k = I + dt * df/dX evaluated at (X_k, nu_k); the control
    Jacobian dF_k/dU_k = dt * B is constant.
    """
    n = len(states) - 1
    dF_dX = np.empty((n, 6, 6))
    eye = np.eye(6)
    for k in range(n):
        dF_dX[k] = eye + dt * plant.f_jacobian(states[k], nus[k])
    return dF_dX, dt * _B


def compute_sensitivities(
    dF_dX: np.ndarray,
    dF_dU: np.ndarray,
    R_k: np.ndarray,
    U0: np.ndarray,
) -> SensitivitySet:
    """Backward recursion for the output sensitivities B_k.

    B_k = [dY_N/dX_N] dF_{N-1}/dX ... dF_{k+1}/dX dF_k/dU, accumulated
    from the terminal step (dY_N/dX_N = I for full-state output), with

        A_lambda = -sum_k B_k R_k^-1 B_k^T,   b_lambda = sum_k B_k U0_k.
    """
    n = len(dF_dX)
    B_k = np.empty((n, 6, 3))
    phi = np.eye(6)
    for k in range(n - 1, -1, -1):
        B_k[k] = phi @ dF_dU
        phi = phi @ dF_dX[k]
    Rinv_BkT = np.linalg.solve(R_k, B_k.transpose(0, 2, 1))  # (n, 3, 6)
    A_lambda = -np.einsum("kij,kjl->il", B_k, Rinv_BkT)
    b_lambda = np.einsum("kij,kj->i", B_k, U0)
    return SensitivitySet(B_k=B_k, A_lambda=A_lambda, b_lambda=b_lambda)


def mpsp_update(
    sens: SensitivitySet, dY_N: np.ndarray, U0: np.ndarray, R_k: np.ndarray
) -> np.ndarray:
    """Closed-form control-history correction.

    U_k = R_k^-1 B_k^T A_lambda^-1 (dY_N - b_lambda), where dY_N is the
    achieved-minus-desired terminal output of the previous prediction.
    """
    try:
        lam = np.linalg.solve(sens.A_lambda, dY_N - sens.b_lambda)
    except np.linalg.LinAlgError as exc:
        raise MpspError(
            "static-program matrix singular; use more steps or a smaller R"
        ) from exc
    rhs = sens.B_k.transpose(0, 2, 1) @ lam  # (N-1, 3)
    return np.linalg.solve(R_k, rhs.T).T


def rho_error_pct(Y_N: np.ndarray, Y_star: np.ndarray) -> float:
    """Percent error between achieved and commanded terminal baseline.

    rho is the terminal position norm; the commanded value comes from
    the desired terminal state.
    """
    rho_f = np.linalg.norm(Y_N[POS])
    rho_d = np.linalg.norm(Y_star[POS])
    return abs(rho_f - rho_d) / rho_d * 100.0


def mpsp_solve(
    plant: RelativePlant,
    x0: np.ndarray,
    Y_star: np.ndarray,
    config: MpspConfig,
    guess: np.ndarray,
) -> tuple[np.ndarray, list[dict], np.ndarray]:
    """Outer prediction/correction loop.

    Returns (controls, iteration log, final trajectory).  Each log row
    records the iteration number, the six terminal errors, and %rho_e.
    The last row carries converged=False if the tolerance was not met.
    """
    U = np.asarray(guess, dtype=float).copy()
    R_kmat = config.dt * config.R_l
    log: list[dict] = []
    states = nus = None
    for it in range(config.max_iter + 1):
        states, nus, Y_N = predict_trajectory(plant, x0, U, config.dt)
        dY = Y_N - Y_star
        pct = rho_error_pct(Y_N, Y_star)
        log.append(
            {
                "iteration": it,
                "terminal_errors": dY.copy(),
                "rho_error_pct": pct,
                "converged": pct < config.tol_rho_pct,
            }
        )
        if pct < config.tol_rho_pct or it == config.max_iter:
            break
        dF_dX, dF_dU = analytic_state_jacobians(plant, states, nus, config.dt)
        sens = compute_sensitivities(dF_dX, dF_dU, R_kmat, U)
        U = mpsp_update(sens, dY, U, R_kmat)
    return U, log, states
