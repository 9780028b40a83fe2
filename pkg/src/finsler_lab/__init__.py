"""Numerical Finsler submanifold geometry on the pulled-back bundle."""

from .errors import (ConvexityError, ExprSyntaxError, FinslerLabError, InputError,
                     MathDomainError, RankDeficiencyError, SceneError)
from .finsler import AmbientEval, MetricSpec, TangentPoint, ambient_eval
from .submanifold import ImmersionSpec, InducedPackage, SubPoint, induce

__version__ = "0.1.0"

__all__ = [
    "AmbientEval", "ConvexityError", "ExprSyntaxError", "FinslerLabError", "ImmersionSpec",
    "InducedPackage", "InputError", "MathDomainError", "MetricSpec", "RankDeficiencyError",
    "SceneError", "SubPoint", "TangentPoint", "ambient_eval", "induce",
]
