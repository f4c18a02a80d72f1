"""Deformed-commutator phase signatures of pulsed optomechanics.

Computes the photon-number-quartic optical phase produced by a quartic
momentum deformation of the commutation relations, for a single trapped
oscillator and for chains of coupled oscillators driven by four-pulse light
trains, together with independent brute-force oracles for every analytic
formula.
"""

from .config import RunConfig, parse_config
from .coupling import CouplingFunction
from .errors import (
    ConfigError,
    InvariantViolationError,
    NumericalFailureError,
    UnstableChainError,
)
from .lattice import (
    ChainSpec,
    MomentumSample,
    NormalModes,
    build_hessian,
    com_commutator_factor,
    commutator_kernel,
    coupling_kernel,
    decompose_normal_modes,
    normal_modes,
)
from .magnus import (
    PermutationTable,
    PhaseResult,
    QuadraturePlan,
    magnus5_quadrature,
    permutation_table,
    quadratic_phase,
)
from .pulsed import (
    IntervalSum,
    PulseSchedule,
    ScanResult,
    fit_scaling_exponent,
    heaviside_decomposition,
    phi_chain,
    phi_single,
    pulse_times,
    scan_lattice,
    trig_product_integral,
)

__version__ = "0.1.0"

__all__ = [
    "ChainSpec", "NormalModes", "MomentumSample", "CouplingFunction",
    "PermutationTable", "QuadraturePlan", "PhaseResult", "PulseSchedule",
    "IntervalSum", "ScanResult", "RunConfig",
    "build_hessian", "decompose_normal_modes", "normal_modes",
    "commutator_kernel", "coupling_kernel", "com_commutator_factor",
    "permutation_table", "quadratic_phase", "magnus5_quadrature",
    "pulse_times", "heaviside_decomposition", "trig_product_integral",
    "phi_single", "phi_chain", "scan_lattice", "fit_scaling_exponent",
    "parse_config",
    "ConfigError", "InvariantViolationError", "NumericalFailureError",
    "UnstableChainError",
]
