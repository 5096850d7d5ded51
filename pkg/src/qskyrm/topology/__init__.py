"""Stokes textures and their topology: LG modes, gridded fields, Skyrme
numbers and Poincare-sphere coverage."""
from ._backend import BACKEND
from .fields import (BasisMismatchError, GridSpec, ModeMap, NormalizedStokes,
                     StokesField, lg_field, mode_stack, normalize_stokes,
                     reduced_stokes_field)
from .skyrme import (DegenerateTriangleError, ExcessiveMaskingError,
                     SkyrmeResult, coverage_bins, poincare_coverage,
                     skyrme_number_quadrature, skyrme_number_solid_angle)

__all__ = [
    "BACKEND", "BasisMismatchError", "DegenerateTriangleError",
    "ExcessiveMaskingError", "GridSpec", "ModeMap", "NormalizedStokes",
    "SkyrmeResult", "StokesField", "coverage_bins", "lg_field", "mode_stack",
    "normalize_stokes", "poincare_coverage", "reduced_stokes_field",
    "skyrme_number_quadrature", "skyrme_number_solid_angle",
]
