"""Second-order time-local master equations with switched and prepared initial correlations."""

__version__ = "0.1.0"

from .bath import Bath, CorrelationFunction, NumericalError, OhmicSpectralDensity, kms_check
from .coefficients import (
    DiamondCoefficient,
    ExponentialSwitch,
    diamond_asymptotic,
    diamond_finite,
    diamond_prepared,
    diamond_switched,
)
from .evolve import Trajectory, gamma_series, integrate, jolt_metrics
from .liouvillian import Liouvillian, decay_rate
from .operators import HamiltonianSchedule, OperatorError
from .scenarios import (
    Scenario,
    factorized,
    prepare_by_decoherence,
    prepare_by_equilibration,
    prepare_by_flipping,
    prepare_by_freezing,
    prepare_by_swapping,
    switched,
)

__all__ = [
    "Bath", "CorrelationFunction", "NumericalError", "OhmicSpectralDensity", "kms_check",
    "DiamondCoefficient", "ExponentialSwitch", "diamond_asymptotic", "diamond_finite",
    "diamond_prepared", "diamond_switched", "Trajectory", "gamma_series", "integrate",
    "jolt_metrics", "Liouvillian", "decay_rate", "HamiltonianSchedule", "OperatorError",
    "Scenario", "factorized", "prepare_by_decoherence", "prepare_by_equilibration",
    "prepare_by_flipping", "prepare_by_freezing", "prepare_by_swapping", "switched",
]
