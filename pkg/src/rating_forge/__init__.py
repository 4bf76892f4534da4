"""rating-forge: socially-optimal rating mechanisms for service-exchange platforms.

Library layout:

- :mod:`rating_forge.core` -- stage game, plans, report channel, transition kernels
- :mod:`rating_forge.design` -- update-rule conditions, payoff geometry, decomposition
- :mod:`rating_forge.engine` -- the fixed-memory nonstationary recommended strategy
- :mod:`rating_forge.stationary` -- stationary baselines, grid search, price of stationarity
- :mod:`rating_forge.bounds` -- welfare upper bound for non-differential punishments
- :mod:`rating_forge.sim` -- Monte Carlo platform simulation and probes
- :mod:`rating_forge.cli` -- command-line experiments
"""

from .core import (
    ALTRUISTIC,
    DEV0,
    DEV1,
    DEV01,
    FAIR,
    SELFISH,
    GameParams,
    Plan,
    RatingDistribution,
    RatingProfile,
    RatingUpdateRule,
    ValidationError,
)

__all__ = [
    "GameParams",
    "Plan",
    "RatingUpdateRule",
    "RatingDistribution",
    "RatingProfile",
    "ValidationError",
    "ALTRUISTIC",
    "FAIR",
    "SELFISH",
    "DEV0",
    "DEV1",
    "DEV01",
]

__version__ = "0.1.0"
