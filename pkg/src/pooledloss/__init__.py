"""First- and second-order approximations to the loss of large default pools."""

from .errors import NumericalError, PooledLossError, ValidationError
from .model import ObligorParams, PortfolioSpec, RunConfig, SystematicRiskSpec, TimeGrid, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "NumericalError",
    "ObligorParams",
    "PooledLossError",
    "PortfolioSpec",
    "RunConfig",
    "SystematicRiskSpec",
    "TimeGrid",
    "ValidationError",
    "load_config",
    "parse_config",
]
