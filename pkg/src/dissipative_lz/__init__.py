"""Multi-D2 variational dynamics of a Landau-Zener sweep coupled to a bosonic bath."""

from .analytics import lz_standard, multimode_final, single_mode_final
from .bath import (BathMode, Continuum, ExplicitModes, Model, QubitParams, SpectralDensity,
                   discretize_linear, discretize_logarithmic, evaluate_spectral_density,
                   integrated_quantities, resolve_modes)
from .eom import SolverPolicy, assemble, solve_derivatives
from .errors import (ConfigError, DomainError, LZError, NumericalBreakdown, OutputError,
                     TruncationError)
from .integrator import RunConfig, rk4_step, run, steady_state_probability
from .state import (Trajectory, VariationalState, boson_numbers, debye_waller,
                    hamiltonian_expectation, initialize, norm, sigma_z_expectation,
                    transition_probability)

__version__ = "0.1.0"
