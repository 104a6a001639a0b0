"""Steady-state transport in boundary-driven quasiperiodic fermion chains with dephasing."""

__version__ = "0.1.0"

from .errors import (EmptyRange, InsufficientPoints, NonPositiveCurrent, NonUniqueSteadyState,
                     NumericalBreakdown, QPTransportError, ResidualTooLarge, SingularSystem,
                     SizeTooLarge, ZeroBias)
from .models import (AAH, GOLDEN_RATIO, ChainSpec, Clean, DriveSpec, Fibonacci, aah_potential,
                     build_drift_and_injection, build_hamiltonian, fibonacci_potential,
                     fibonacci_word_recursive, potential_kind, site_potential, theta_grid)
from .solver import (NessSolution, SolverOptions, boundary_currents, extract_currents,
                     lyapunov_eigen_solve, solve_ness, sparse_vectorized_solve)
from .analysis import (FitResult, ScalingSeries, TransportClass, classify_transport, conductivity,
                       dephasing_length, fit_localization_decay, fit_small_gamma_beta,
                       fit_transport_exponent, piecewise_kappa_model)
from .sweep import SweepConfig, SweepRecord, cache_key, fibonacci_sizes, run_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
