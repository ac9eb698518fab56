"""Quantum-state-diffusion unravelings of Lindblad dynamics with tunable noise correlations.

Modules:

* :mod:`unravel.hilbert` operators, states and moments on a truncated Fock basis
* :mod:`unravel.noise` correlated complex Wiener increments
* :mod:`unravel.policies` rules choosing the correlation factor ``c``
* :mod:`unravel.sde` the Ito stochastic Schrodinger equation and its integrator
* :mod:`unravel.master` deterministic master-equation reference
* :mod:`unravel.models` physical models, squeezing and rate predictions
* :mod:`unravel.ensemble` trajectory ensembles and statistics
* :mod:`unravel.config` / :mod:`unravel.cli` experiment presets and the runner
"""

__version__ = "0.1.0"

from .errors import (ConfigError, DimensionError, DomainError, FitError, InstabilityError,
                     TruncationError, TruncationWarning, UnravelError)
from .policies import (IMAGINARY_NOISE, QSD, REAL_NOISE, CovariancePhase, Fixed, SqueezedPhase,
                       parse_policy)
from .sde import LindbladChannel, SdeConfig, run_batch, run_trajectory, step

__all__ = [
    "ConfigError", "DimensionError", "DomainError", "FitError", "InstabilityError",
    "TruncationError", "TruncationWarning", "UnravelError",
    "IMAGINARY_NOISE", "QSD", "REAL_NOISE", "CovariancePhase", "Fixed", "SqueezedPhase",
    "parse_policy", "LindbladChannel", "SdeConfig", "run_batch", "run_trajectory", "step",
]
