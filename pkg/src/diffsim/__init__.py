"""diffsim: differentiable agent-based simulation toolkit."""

from .ad import (BACKEND, Gradient, Tape, TapeDomainError, Var, Vec,
                 available_backends, detach)

__all__ = [
    "BACKEND", "Gradient", "Tape", "TapeDomainError", "Var", "Vec",
    "available_backends", "detach",
]

__version__ = "0.1.0"
