"""Infinite-horizon LQR tracking over the linearized relative dynamics.

Also supplies the initial control guess for the predictive methods and
the baseline inside the neural-augmented controller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import hill_linear_matrices
from .numerics import solve_are

# Default weights used throughout the scenario studies.
DEFAULT_Q = np.eye(6)
DEFAULT_R = 1e9 * np.eye(3)

# Indices of the acceleration rows in the 6-state vector.
ACCEL_ROWS = np.array([1, 3, 5])


@dataclass(frozen=True)
class LqrDesign:
    """Immutable LQR design: weights, Riccati solution, and gain."""

    omega: float
    Q: np.ndarray
    R: np.ndarray
    P: np.ndarray
    K: np.ndarray
    A: np.ndarray
    B: np.ndarray


def design_lqr(
    omega: float, Q: np.ndarray | None = None, R: np.ndarray | None = None
) -> LqrDesign:
    """Design the tracking LQR for a circular chief with mean motion ``omega``.

    Defaults are Q = I6 and R = 1e9 I3.  The closed loop A - BK is
    guaranteed Hurwitz by the Riccati solver contract.
    """
    Q = DEFAULT_Q if Q is None else np.asarray(Q, dtype=float)
    R = DEFAULT_R if R is None else np.asarray(R, dtype=float)
    A, B = hill_linear_matrices(omega)
    P = solve_are(A, B, Q, R)
    K = np.linalg.solve(R, B.T @ P)
    return LqrDesign(omega=omega, Q=Q, R=R, P=P, K=K, A=A, B=B)


def lqr_feedforward(A: np.ndarray, Xd: np.ndarray, Xd_dot: np.ndarray) -> np.ndarray:
    """Feedforward acceleration cancelling the desired-trajectory forcing.

    Solves B U_ff = Xd_dot - A Xd in the least-squares sense; because B
    column-selects the acceleration rows this is simply the extraction
    of rows 2, 4, 6 with flipped sign on the forcing term.
    """
    forcing = A @ Xd - Xd_dot
    return -forcing[ACCEL_ROWS]


def lqr_tracking_control(
    design: LqrDesign,
    X: np.ndarray,
    Xd: np.ndarray,
    Xd_dot: np.ndarray,
    A: np.ndarray | None = None,
) -> np.ndarray:
    """Tracking control U = -K (X - Xd) + U_ff.

    The feedforward makes the tracking-error dynamics homogeneous when
    the desired trajectory is consistent with the linear model.
    """
    A = design.A if A is None else A
    return -design.K @ (X - Xd) + lqr_feedforward(A, Xd, Xd_dot)
