"""Time-varying SIS epidemic model with nonlinear incidence and impulsive culling."""

__version__ = "0.1.0"

from .errors import (AnalysisError, DomainError, ImpsisError, IntegrationError, ModelConsistencyError,
                     QuadratureError, ScenarioError)
from .integrator import ImpulseSchedule, Scenario, Tolerances, Trajectory, apply_impulse, integrate
from .model import ModelParams, State, constant_params, vector_field
from .paramfns import Constant, PiecewiseConstant, PiecewiseLinear, Scaled, Sinusoid, Sum
from .thresholds import Thresholds

__all__ = [
    "AnalysisError", "DomainError", "ImpsisError", "IntegrationError", "ModelConsistencyError",
    "QuadratureError", "ScenarioError", "ImpulseSchedule", "Scenario", "Tolerances", "Trajectory",
    "apply_impulse", "integrate", "ModelParams", "State", "constant_params", "vector_field",
    "Constant", "PiecewiseConstant", "PiecewiseLinear", "Scaled", "Sinusoid", "Sum", "Thresholds",
]
