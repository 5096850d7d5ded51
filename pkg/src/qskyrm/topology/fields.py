"""Transverse-plane fields: Laguerre-Gauss modes, grids, and Stokes maps."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..hilbert import DensityMatrix
from ._backend import kernels


class BasisMismatchError(ValueError):
    """Density-matrix basis incompatible with the requested mode map."""


@dataclass(frozen=True)
class GridSpec:
    """Cell-centered square sampling grid, symmetric about the origin.

    Even cell counts keep the coordinate singularity at r = 0 between
    samples.  ``half_extent`` is measured in waist units.
    """

    nx: int = 256
    ny: int = 256
    half_extent: float = 3.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per axis")
        if self.nx % 2 or self.ny % 2:
            raise ValueError("cell counts must be even so no sample sits at "
                             "the origin")
        if self.half_extent <= 0:
            raise ValueError("half_extent must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_extent / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.half_extent / self.ny

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = -self.half_extent + (np.arange(self.nx) + 0.5) * self.dx
        y = -self.half_extent + (np.arange(self.ny) + 0.5) * self.dy
        return x, y

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y)  # rows index y, columns index x

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "half_extent": self.half_extent}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(int(d["nx"]), int(d["ny"]), float(d["half_extent"]))


@dataclass(frozen=True)
class ModeMap:
    """Mode index -> OAM charge for the zero-radial-order LG basis."""

    ells: tuple[int, ...]
    waist: float = 1.0

    def __post_init__(self):
        if len(set(self.ells)) != len(self.ells):
            raise ValueError("mode map charges must be distinct")
        if self.waist <= 0:
            raise ValueError("waist must be positive")


def lg_field(l: int, waist: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Normalized zero-radial-order Laguerre-Gauss amplitude.

    f_l = A (r/w)^{|l|} exp(-r^2/w^2) exp(i l phi) with A chosen so the
    transverse intensity integrates to one.
    """
    if waist <= 0:
        raise ValueError("waist must be positive")
    r2 = (x * x + y * y) / (waist * waist)
    amp = math.sqrt(2.0 ** (abs(l) + 1)
                    / (math.pi * waist * waist * math.factorial(abs(l))))
    rad = amp * r2 ** (abs(l) / 2.0) * np.exp(-r2)
    if l == 0:
        return rad.astype(complex)
    return rad * np.exp(1j * l * np.arctan2(y, x))


def mode_stack(modes: ModeMap, grid: GridSpec) -> np.ndarray:
    """Complex array (n_modes, ny, nx) of the mode amplitudes on the grid."""
    xx, yy = grid.mesh()
    return np.stack([lg_field(l, modes.waist, xx, yy) for l in modes.ells])


@dataclass
class StokesField:
    """Spatially resolved Stokes maps from a spin-orbit density matrix."""

    grid: GridSpec
    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    modes: ModeMap | None = None

    def __post_init__(self):
        shape = (self.grid.ny, self.grid.nx)
        for name in ("s0", "s1", "s2", "s3"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != grid {shape}")
            setattr(self, name, arr)
        norm = np.sqrt(self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2)
        if np.any(self.s0 < norm - 1e-9):
            raise ValueError("pointwise positivity violated: S0 < |S|")

    def vector_norm(self) -> np.ndarray:
        return np.sqrt(self.s1 ** 2 + self.s2 ** 2 + self.s3 ** 2)

    def to_json_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "waist": self.modes.waist if self.modes else None,
            "mode_charges": list(self.modes.ells) if self.modes else None,
            "s0": self.s0.tolist(),
            "s1": self.s1.tolist(),
            "s2": self.s2.tolist(),
            "s3": self.s3.tolist(),
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh)

    @classmethod
    def from_json_dict(cls, d: dict) -> "StokesField":
        modes = None
        if d.get("mode_charges"):
            modes = ModeMap(tuple(d["mode_charges"]), float(d.get("waist") or 1.0))
        return cls(GridSpec.from_dict(d["grid"]),
                   np.array(d["s0"]), np.array(d["s1"]),
                   np.array(d["s2"]), np.array(d["s3"]), modes)

    @classmethod
    def read_json(cls, path) -> "StokesField":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def write_csv(self, path) -> None:
        x, y = self.grid.axes()
        with open(path, "w") as fh:
            fh.write("x,y,s0,s1,s2,s3\n")
            for iy in range(self.grid.ny):
                for ix in range(self.grid.nx):
                    fh.write(",".join(f"{v:.17g}" for v in (
                        x[ix], y[iy], self.s0[iy, ix], self.s1[iy, ix],
                        self.s2[iy, ix], self.s3[iy, ix])) + "\n")


_POL_INDEX = {"R": 0, "L": 1}


def reduced_stokes_field(rho: DensityMatrix, modes: ModeMap,
                         grid: GridSpec) -> StokesField:
    """Stokes maps S_k(x, y) of a (polarization x spatial-mode) state.

    The state's basis must be the product of {R, L} with the mode charges in
    ``modes``; each basis tuple carries one polarization and one OAM value.
    S_0 is the local trace of the reduced polarization matrix and S_k its
    Pauli expectations, so mixed states yield |S| < S_0.
    """
    if len(rho.slots) != 2:
        raise BasisMismatchError(
            f"expected a two-slot (pol x mode) basis, got slots {rho.slots}")
    sample = rho.basis[0]
    pol_pos = next((i for i, v in enumerate(sample) if v in _POL_INDEX), None)
    if pol_pos is None:
        raise BasisMismatchError(f"no polarization coordinate in {sample}")
    mode_pos = 1 - pol_pos
    charges = {b[mode_pos] for b in rho.basis}
    if charges != set(modes.ells):
        raise BasisMismatchError(
            f"state charges {sorted(charges)} do not match mode map "
            f"{sorted(modes.ells)}")
    m_index = {l: i for i, l in enumerate(modes.ells)}
    nm = len(modes.ells)
    tau = np.zeros((nm, nm, 2, 2), dtype=complex)
    for i, bi in enumerate(rho.basis):
        for j, bj in enumerate(rho.basis):
            a = _POL_INDEX[bi[pol_pos]]
            b = _POL_INDEX[bj[pol_pos]]
            tau[m_index[bi[mode_pos]], m_index[bj[mode_pos]], a, b] = \
                rho.matrix[i, j]
    stack = np.ascontiguousarray(mode_stack(modes, grid))
    s0, s1, s2, s3 = kernels.stokes_maps(np.ascontiguousarray(tau), stack)
    return StokesField(grid, s0, s1, s2, s3, modes)


@dataclass
class NormalizedStokes:
    """Unit Poincare-sphere direction field with a validity mask."""

    grid: GridSpec
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    mask: np.ndarray  # True where the direction is undefined

    @property
    def masked_fraction(self) -> float:
        return float(self.mask.mean())


def normalize_stokes(field: StokesField, eps_rel: float = 1e-6) -> NormalizedStokes:
    """s = S/|S| wherever the cell carries light and is not fully depolarized.

    Cells with S0 <= eps_rel * max(S0) or |S| <= eps_rel * S0 are masked.
    """
    norm = field.vector_norm()
    s0max = float(field.s0.max())
    if s0max <= 0.0:
        raise ValueError("empty Stokes field: S0 is zero everywhere")
    mask = (field.s0 <= eps_rel * s0max) | (norm <= eps_rel * field.s0)
    mask |= norm == 0.0
    if mask.all():
        raise ValueError("all cells masked; nothing to normalize")
    safe = np.where(mask, 1.0, norm)
    sx = np.where(mask, 0.0, field.s1 / safe)
    sy = np.where(mask, 0.0, field.s2 / safe)
    sz = np.where(mask, 1.0, field.s3 / safe)
    return NormalizedStokes(field.grid,
                            np.ascontiguousarray(sx),
                            np.ascontiguousarray(sy),
                            np.ascontiguousarray(sz),
                            np.ascontiguousarray(mask))
