"""Quasi-local diagonalization of a weakly interacting disordered Ising chain.

The main entry points are :func:`diagonalize_kam` for one Hamiltonian,
:func:`run_ensemble` for disorder averages, and the estimator classes in
:mod:`mblkam.estimators`.
"""

from .ensemble import (
    EnsembleConfig,
    EnsembleResults,
    LlaFit,
    block_connectivity,
    correlation_decay_profile,
    fractional_moment,
    lla_fit,
    resonance_density,
    run_ensemble,
)
from .estimators import ExactDiagonalizer, KamDiagonalizer, LlaEstimator
from .exceptions import ConfigError, ConvergenceWarning, DimensionError, MblkamError, NumericalError
from .kam import KamConfig, KamResult, diagonalize_kam, scale_bands
from .model import (
    ChainGeometry,
    DisorderRealization,
    Distribution,
    DistributionSpec,
    build_hamiltonian,
    classical_energy,
    is_resonant_site,
    sample_disorder,
    single_flip_delta,
)
from .observables import (
    Gibbs,
    abs_magnetization,
    eigenstate_expectation_all,
    liom,
    locality_profile,
    pauli_decompose,
    state_average,
    truncated_correlation,
)
from .oracle import Spectrum, diagonalize, kron_operator

__version__ = "0.1.0"

__all__ = [
    "ChainGeometry",
    "ConfigError",
    "ConvergenceWarning",
    "DimensionError",
    "DisorderRealization",
    "Distribution",
    "DistributionSpec",
    "EnsembleConfig",
    "EnsembleResults",
    "ExactDiagonalizer",
    "Gibbs",
    "KamConfig",
    "KamDiagonalizer",
    "KamResult",
    "LlaEstimator",
    "LlaFit",
    "MblkamError",
    "NumericalError",
    "Spectrum",
    "abs_magnetization",
    "block_connectivity",
    "build_hamiltonian",
    "classical_energy",
    "correlation_decay_profile",
    "diagonalize",
    "diagonalize_kam",
    "eigenstate_expectation_all",
    "fractional_moment",
    "is_resonant_site",
    "kron_operator",
    "liom",
    "lla_fit",
    "locality_profile",
    "pauli_decompose",
    "resonance_density",
    "run_ensemble",
    "sample_disorder",
    "scale_bands",
    "single_flip_delta",
    "state_average",
    "truncated_correlation",
]
