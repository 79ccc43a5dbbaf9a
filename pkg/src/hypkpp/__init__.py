"""Fisher-KPP fronts on hyperbolic space, reduced along cohomogeneity-one
symmetry classes: traveling waves, a 1D front solver, self-similar dipole
analysis and front estimators."""
from .errors import HypKPPError, NumericalError, ValidationError
from .geometry import SymmetryClass
from .reaction import ReactionFn, logistic, speeds, validate_kpp

__all__ = [
    "HypKPPError",
    "NumericalError",
    "ReactionFn",
    "SymmetryClass",
    "ValidationError",
    "logistic",
    "speeds",
    "validate_kpp",
]
__version__ = "0.1.0"
