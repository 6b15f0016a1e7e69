"""Numerical toolkit for local limit theorems of triangular arrays: exponents
from canonical measures, array models, Fourier inversion, rate terms and
condition audits."""

__version__ = "0.1.0"

from .quad import QuadResult, QuadratureError, integrate, integrate_oscillatory  # noqa: E402
from .canonical import CanonicalMeasure, CharExponent, exponent_from_measure  # noqa: E402
from .array import ArrayModel, model_from_name  # noqa: E402
from .inversion import DensityGrid, density_grid, density_point, sup_distance  # noqa: E402
from .rates import RateRecord, ConditionAudit, audit_all, rho  # noqa: E402

__all__ = [
    "QuadResult", "QuadratureError", "integrate", "integrate_oscillatory",
    "CanonicalMeasure", "CharExponent", "exponent_from_measure",
    "ArrayModel", "model_from_name",
    "DensityGrid", "density_grid", "density_point", "sup_distance",
    "RateRecord", "ConditionAudit", "audit_all", "rho",
]
