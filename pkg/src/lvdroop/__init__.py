"""Voltage dynamics of quadratic-droop power networks as a Lotka-Volterra system."""

__version__ = "0.1.0"

from .certify import (
    CertificateReport,
    EquilibriumResult,
    cooperativity_check,
    dissipativity_check,
    gershgorin_negative_definite,
    homogeneous_norm,
    hurwitz_check,
    is_metzler,
    lyapunov_entropy,
    lyapunov_entropy_rate,
    lyapunov_l1_rate,
    solve_equilibrium,
)
from .network import (
    InteractionMatrix,
    LineParams,
    NodeParams,
    PowerNetwork,
    build_network,
    drive_vector,
    interaction_matrix_coupled,
    interaction_matrix_decoupled,
    reactive_power,
    split_parts,
    vector_field,
)
from .signals import SignalSpec, assumption1_bounds, eval_signal, freeze
from .sim import IntegratorSettings, Trajectory, batch_integrate, integrate, integrate_frozen
