"""Generalized (continuous-time) model predictive static programming.

Replaces the discrete sensitivity products with a weight matrix W(t)
integrated backward from the final time, accumulates the static-program
data by trapezoidal quadrature, and applies a closed-form continuous
control-history correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import RelativePlant
from .mpsp import rho_error_pct

_B = np.zeros((6, 3))
_B[1, 0] = 1.0
_B[3, 1] = 1.0
_B[5, 2] = 1.0


class GmpspError(RuntimeError):
    """Raised on sensitivity-field or update failures."""


@dataclass
class SensitivityField:
    """Backward weight matrices and continuous input sensitivities.

    W has shape (N, 6, 6) with W[-1] = I (full-state terminal output);
    B_c[k] = W[k] @ B on the same grid.
    """

    W: np.ndarray
    B_c: np.ndarray


@dataclass
class GmpspAccumulators:
    """Static-program data: A_lambda = int Bc R^-1 Bc^T dt (symmetric PD)
    and b_lambda = int Bc U0 dt."""

    A_lambda: np.ndarray
    b_lambda: np.ndarray


def integrate_W_backward(
    plant: RelativePlant, states: np.ndarray, nus: np.ndarray, dt: float
) -> SensitivityField:
    """Integrate dW/dt = -W df/dX backward by RK4 from W(tf) = I.

    The Jacobian at the half-step is evaluated at the midpoint of the
    stored trajectory samples.
    """
    n = len(states)
    J = np.empty((n, 6, 6))
    for k in range(n):
        J[k] = plant.f_jacobian(states[k], nus[k])
    W = np.empty((n, 6, 6))
    W[-1] = np.eye(6)
    for k in range(n - 2, -1, -1):
        J_mid = plant.f_jacobian(
            0.5 * (states[k] + states[k + 1]), 0.5 * (nus[k] + nus[k + 1])
        )
        w = W[k + 1]
        h = -dt  # stepping backward in time
        k1 = -w @ J[k + 1]
        k2 = -(w + 0.5 * h * k1) @ J_mid
        k3 = -(w + 0.5 * h * k2) @ J_mid
        k4 = -(w + h * k3) @ J[k]
        W[k] = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(W[k])):
            raise GmpspError(f"non-finite sensitivity weight at grid index {k}")
    return SensitivityField(W=W, B_c=W @ _B)


def _controls_on_grid(U0: np.ndarray, n: int) -> np.ndarray:
    """Zero-order-hold control history sampled at the n grid points."""
    U_grid = np.empty((n, 3))
    U_grid[:-1] = U0
    U_grid[-1] = U0[-1]
    return U_grid


def gmpsp_accumulate(
    field: SensitivityField, U0: np.ndarray, R: np.ndarray, dt: float
) -> GmpspAccumulators:
    """Trapezoidal accumulation of A_lambda and b_lambda on the grid."""
    Bc = field.B_c
    n = len(Bc)
    Rinv_BcT = np.linalg.solve(R, Bc.transpose(0, 2, 1))
    quad_A = np.einsum("kij,kjl->kil", Bc, Rinv_BcT)
    quad_b = np.einsum("kij,kj->ki", Bc, _controls_on_grid(U0, n))
    A_lambda = np.trapezoid(quad_A, dx=dt, axis=0)
    b_lambda = np.trapezoid(quad_b, dx=dt, axis=0)
    return GmpspAccumulators(A_lambda=A_lambda, b_lambda=b_lambda)


def gmpsp_update(
    acc: GmpspAccumulators,
    dY_tf: np.ndarray,
    field: SensitivityField,
    R: np.ndarray,
) -> np.ndarray:
    """Closed-form continuous control correction sampled on the grid.

    U(t) = -R^-1 Bc(t)^T [A_lambda^-1 (dY(tf) - b_lambda)], where dY(tf)
    is the achieved-minus-desired terminal output.  The returned history
    holds the first N-1 grid samples (zero-order hold).
    """
    try:
        lam = np.linalg.solve(acc.A_lambda, dY_tf - acc.b_lambda)
    except np.linalg.LinAlgError as exc:
        raise GmpspError("accumulated static-program matrix singular") from exc
    rhs = field.B_c.transpose(0, 2, 1) @ lam  # (N, 3)
    U_grid = -np.linalg.solve(R, rhs.T).T
    return U_grid[:-1]


def gmpsp_solve(
    plant: RelativePlant,
    x0: np.ndarray,
    Y_star: np.ndarray,
    guess: np.ndarray,
    dt: float,
    R: np.ndarray | None = None,
    tol_rho_pct: float = 1.0,
    max_iter: int = 10,
) -> tuple[np.ndarray, list[dict], np.ndarray]:
    """Outer prediction/correction loop of the continuous formulation.

    Returns (controls, iteration log, final trajectory) with the same
    log schema as the discrete solver.
    """
    U = np.asarray(guess, dtype=float).copy()
    R = 1e9 * np.eye(3) if R is None else R
    log: list[dict] = []
    states = None
    for it in range(max_iter + 1):
        states, nus = plant.propagate(x0, U, dt)
        Y_N = states[-1]
        dY = Y_N - Y_star
        pct = rho_error_pct(Y_N, Y_star)
        log.append(
            {
                "iteration": it,
                "terminal_errors": dY.copy(),
                "rho_error_pct": pct,
                "converged": pct < tol_rho_pct,
            }
        )
        if pct < tol_rho_pct or it == max_iter:
            break
        field = integrate_W_backward(plant, states, nus, dt)
        acc = gmpsp_accumulate(field, U, R, dt)
        U = gmpsp_update(acc, dY, field, R)
    return U, log, states
