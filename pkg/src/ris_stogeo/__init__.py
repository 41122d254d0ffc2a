"""Coverage, spectrum efficiency and energy efficiency of RIS-aided
millimetre-wave cellular networks, analytically and by simulation."""

from .params import ScenarioConfig, DerivedParams, ConfigError, derive_params, validate_config, load_config, default_config
from .analytic import AnalyticModel, QuadratureSpec, AssociationProbabilities, ConvergenceError

__all__ = [
    "ScenarioConfig", "DerivedParams", "ConfigError", "derive_params", "validate_config",
    "load_config", "default_config", "AnalyticModel", "QuadratureSpec",
    "AssociationProbabilities", "ConvergenceError",
]
__version__ = "0.1.0"
