"""Directed polymer with equally spaced repulsive interfaces.

Exact free energy, renewal mass function, partition function and exact
sampling of the polymer measure, plus a phase-diagram experiment harness.
"""

from .errors import DomainError, HorizonError, InfeasibleRunError, ParameterError, SolverError
from .free_energy import (ModelParams, ScalingPoint, asymptotic_phi, free_energy, kappa,
                          renewal_moments, x_beta)
from .polymer import (build_instance, last_contact_law, partition_function, sample_endpoint,
                      sample_polymer, sample_skeleton)
from .regimes import RegimeLabel, classify, predicted_orders, run_experiment, srw_contrast
from .renewal import build_renewal, mass_function, regime_profile_report, tilt_identity_check
from .srw import INFINITY, InterfaceSpec, hitting_law, k_fold_hitting, verify_hitting_bounds

__all__ = [
    "DomainError", "HorizonError", "InfeasibleRunError", "ParameterError", "SolverError",
    "ModelParams", "ScalingPoint", "asymptotic_phi", "free_energy", "kappa",
    "renewal_moments", "x_beta",
    "build_instance", "last_contact_law", "partition_function", "sample_endpoint",
    "sample_polymer", "sample_skeleton",
    "RegimeLabel", "classify", "predicted_orders", "run_experiment", "srw_contrast",
    "build_renewal", "mass_function", "regime_profile_report", "tilt_identity_check",
    "INFINITY", "InterfaceSpec", "hitting_law", "k_fold_hitting", "verify_hitting_bounds",
]

__version__ = "0.1.0"
