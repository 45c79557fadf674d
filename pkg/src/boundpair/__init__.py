"""Two-excitation bound states in a dissipative atom chain and their far-field signatures."""
from .model import ComplexRates, ConfigError, ModelParams, PhysicsError, RegimeWarning

__all__ = ["ComplexRates", "ConfigError", "ModelParams", "PhysicsError", "RegimeWarning"]
__version__ = "0.1.0"
