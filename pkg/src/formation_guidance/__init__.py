"""Satellite formation-flying relative dynamics and guidance algorithms.

Provides the nonlinear relative equations of motion in the Hill frame and
five guidance schemes for formation reconfiguration: LQR tracking,
infinite- and finite-time state-dependent Riccati control, model
predictive static programming (discrete and continuous), and a neural-
network-augmented LQR for plant uncertainty, plus a scenario harness and
command-line interface.
"""

__version__ = "0.1.0"
