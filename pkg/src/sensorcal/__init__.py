"""Calibration benchmarking toolkit for chemical multisensor arrays.

Five regression families (MLR, shallow NN, epsilon-SVR, GPR, echo state
network) plus tapped-delay dynamic expansion, a temporal-split grid-search
protocol over field and laboratory gas-sensor datasets, and reporting of
accuracy, transient responsiveness and on-board deployment footprint.
"""

from sensorcal.errors import (
    ConvergenceError,
    DataError,
    ParseError,
    SingularityError,
    TrialFailure,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DataError",
    "ParseError",
    "SingularityError",
    "TrialFailure",
    "__version__",
]
