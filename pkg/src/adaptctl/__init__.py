"""Adaptive control and learning: models, analysis, estimators, adaptive laws and simulation."""
from .errors import DegenerateGainError, DivergenceError, InfeasibleError

__all__ = ["DegenerateGainError", "DivergenceError", "InfeasibleError"]
__version__ = "0.1.0"
