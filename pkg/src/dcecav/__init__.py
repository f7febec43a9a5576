"""Two-level atom in a cavity with a modulated mode frequency.

Track A propagates the rotating-wave problem through Lie-algebraic
(gamma, beta) functions; Track B integrates the full Hamiltonian in a
truncated Fock x qubit space.
"""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    DISPERSIVE,
    RESONANT,
    ConfigError,
    InitialLadderState,
    ModelParams,
    NumericsConfig,
    chi_at,
    omega_at,
    validate,
)
from .ode import IntegrationError, OdeProblem, integrate  # noqa: E402
from .su11 import bogoliubov_coeffs, number_coeffs, solve_gammas  # noqa: E402
from .ladder import ladder_amplitudes, solve_joint, ui_matrix  # noqa: E402
from .semianalytic import excited_prob, field_moments, husimi_grid, mean_photons  # noqa: E402
from .exact import FockQubitState, TruncationError, evolve, husimi_q_numeric, observables  # noqa: E402
from .experiments import qfunction_snapshots, run_comparison, sweep_g_over_eps  # noqa: E402
