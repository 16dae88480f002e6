"""Simulation and inference for interacting reinforced stochastic processes on networks."""

__version__ = "0.1.0"

from .graph import (EigenStructure, Regime, RegimeTag, WeightedNetwork,  # noqa: E402
                    classify_regime, eigenstructure, mean_field_eigenstructure,
                    mean_field_network, validate_network)
from .dynamics import RateSchedule, SystemState, project, simulate, step  # noqa: E402
from .asymptotics import AsymptoticCovariance, assemble, covariance_for  # noqa: E402
