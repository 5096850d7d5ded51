"""Topological invariants of normalized Stokes textures."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .fields import NormalizedStokes


class ExcessiveMaskingError(ValueError):
    """Too few valid cells to evaluate the texture's topology."""


class DegenerateTriangleError(ValueError):
    """A plaquette maps to antipodal sphere points; its area is undefined."""

    def __init__(self, i: int, j: int):
        super().__init__(
            f"degenerate spherical triangle at plaquette ({i}, {j}): vertices "
            "spread over a hemisphere or more")
        self.cell = (i, j)


@dataclass(frozen=True)
class SkyrmeResult:
    """Skyrme number estimate; ``residual`` is the distance to the nearest
    integer and is reported, never hidden."""

    n: float
    estimator: str
    residual: float
    cells_used: int
    cells_total: int

    @classmethod
    def make(cls, n: float, estimator: str, used: int, total: int) -> "SkyrmeResult":
        return cls(n, estimator, abs(n - round(n)), used, total)

    def to_dict(self) -> dict:
        return {"n": self.n, "estimator": self.estimator,
                "residual": self.residual, "cells_used": self.cells_used,
                "cells_total": self.cells_total}


def _mask_u8(field: NormalizedStokes) -> np.ndarray:
    return np.ascontiguousarray(field.mask, dtype=np.uint8)


def _check_usage(used: int, total: int, min_fraction: float) -> None:
    if total == 0 or used < min_fraction * total:
        raise ExcessiveMaskingError(
            f"only {used}/{total} cells usable; need at least "
            f"{min_fraction:.0%} of the grid to cover the texture")


def skyrme_number_quadrature(field: NormalizedStokes,
                             min_unmasked: float = 0.25) -> SkyrmeResult:
    """Skyrme number by central-difference evaluation of the area integral
    (1/4pi) integral of s . (d_x s x d_y s)."""
    total, used, interior = kernels.quadrature_sum(
        field.sx, field.sy, field.sz, _mask_u8(field),
        field.grid.dx, field.grid.dy)
    _check_usage(used, interior, min_unmasked)
    return SkyrmeResult.make(total / (4.0 * math.pi), "quadrature",
                             used, interior)


def skyrme_number_solid_angle(field: NormalizedStokes,
                              min_unmasked: float = 0.25) -> SkyrmeResult:
    """Skyrme number as the summed signed spherical-triangle area of each
    plaquette's image, divided by 4pi.  Robust to coarse grids."""
    omega, used, plaquettes, bad_i, bad_j = kernels.solid_angle_sum(
        field.sx, field.sy, field.sz, _mask_u8(field))
    if bad_i >= 0:
        raise DegenerateTriangleError(bad_i, bad_j)
    _check_usage(used, plaquettes, min_unmasked)
    return SkyrmeResult.make(omega / (4.0 * math.pi), "solid_angle",
                             used, plaquettes)


def coverage_bins(n_bins: int) -> tuple[int, int]:
    """Factor an equal-area latitude-band partition: n_rings x n_per_ring."""
    if n_bins < 1:
        raise ValueError("need at least one bin")
    n_rings = max(1, int(round(math.sqrt(n_bins / 2.0))))
    while n_bins % n_rings:
        n_rings -= 1
    return n_rings, n_bins // n_rings


def poincare_coverage(field: NormalizedStokes, n_bins: int = 512) -> float:
    """Fraction of equal-area Poincare-sphere bins visited by the texture."""
    n_rings, n_phi = coverage_bins(n_bins)
    visited, samples = kernels.coverage_count(
        field.sx, field.sy, field.sz, _mask_u8(field), n_rings, n_phi)
    if samples == 0:
        raise ExcessiveMaskingError("no unmasked samples for coverage")
    return visited / float(n_bins)
