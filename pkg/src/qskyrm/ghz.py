"""Tripartite GHZ-style entanglement across polarization, OAM and wavelength.

Keeping both spectral branches (no dichroic resolution) and driving the
plate so one wavelength converts fully while the other passes untouched
turns the pair state into a two-branch superposition in which photon A's
polarization, photon B's wavelength and photon B's OAM form three logical
qubits.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .device import DeviceParams, apply_qplate, conversion_efficiency
from .hilbert import (DensityMatrix, Photon, PureState, Wavelength,
                      density_from_pure, partial_trace)

_DOF_ORDER = ("wavelength", "pol", "oam")


class OperatingPointError(ValueError):
    """Plate settings too far from (full conversion, no conversion)."""


def ghz_prepare(source: PureState, device: DeviceParams | None = None,
                voltage: float | None = None, *,
                etas: Mapping[Wavelength, float] | None = None,
                force: bool = False,
                phase_convention: str = "real",
                eta_tol: float = 1e-6) -> PureState:
    """Wavelength-selective spin-orbit conversion on both photons.

    The operating point requires eta(lambda1) = 1 and eta(lambda2) = 0; by
    default deviations beyond ``eta_tol`` raise OperatingPointError.  With
    ``force=True`` the transformation is applied with the achieved
    efficiencies instead (callers then report the achieved fidelity).
    Supplying neither device/voltage nor etas applies the ideal point.
    """
    for photon in (Photon.A, Photon.B):
        if photon not in source.photons:
            raise ValueError(f"source must contain photon {photon}")
    if etas is None:
        if device is not None and voltage is not None:
            etas = {wl: conversion_efficiency(voltage, wl.nm, device)
                    for wl in Wavelength}
        else:
            etas = {Wavelength.LAMBDA1: 1.0, Wavelength.LAMBDA2: 0.0}
    e1 = float(etas[Wavelength.LAMBDA1])
    e2 = float(etas[Wavelength.LAMBDA2])
    if not force and (e1 < 1.0 - eta_tol or e2 > eta_tol):
        raise OperatingPointError(
            f"GHZ operating point not met: eta(lambda1)={e1:.6g}, "
            f"eta(lambda2)={e2:.6g}; pass force=True to proceed anyway")
    out = source
    for photon in (Photon.A, Photon.B):
        out = apply_qplate(out, photon, {Wavelength.LAMBDA1: e1,
                                         Wavelength.LAMBDA2: e2},
                           phase_convention)
    return out


def ghz_project(state: PureState, l: int) -> tuple[PureState, float]:
    """Balanced projections erasing which-branch information.

    Photon A is projected on (|l> + |l-2>)/sqrt2 then (|lambda1> +
    |lambda2>)/sqrt2; photon B on (|R> + |L>)/sqrt2.  Returns the heralded
    state of the remaining degrees of freedom and the herald probability.
    """
    sq = 1.0 / math.sqrt(2.0)
    support = {lbl.oam for key in state.amplitudes for lbl in key
               if lbl.photon is Photon.A}
    extra = support - {l, l - 2}
    if extra:
        warnings.warn(
            f"photon A carries OAM support {sorted(extra)} outside the "
            f"({l}, {l - 2}) pair; the balanced projection discards it",
            stacklevel=2)
    out, p = state.collapse_dof(Photon.A, "oam", {l: sq, l - 2: sq})
    out, p2 = out.collapse_dof(Photon.A, "wavelength",
                               {Wavelength.LAMBDA1: sq, Wavelength.LAMBDA2: sq})
    out, p3 = out.collapse_dof(Photon.B, "pol", {"R": sq, "L": sq})
    return out, p * p2 * p3


@dataclass(frozen=True)
class LogicalMapping:
    """Bijections from physical labels to logical bits, one per DOF.

    OAM uses per-photon maps because the two photons occupy disjoint OAM
    pairs.
    """

    pol: Mapping[str, int]
    wavelength: Mapping[Wavelength, int]
    oam_a: Mapping[int, int]
    oam_b: Mapping[int, int]

    def __post_init__(self):
        for name in ("pol", "wavelength", "oam_a", "oam_b"):
            m = getattr(self, name)
            if sorted(m.values()) != sorted(set(m.values())):
                raise ValueError(f"{name} mapping is not a bijection")

    @classmethod
    def default(cls, l: int = 0) -> "LogicalMapping":
        """(R,L)->(0,1), (lambda1,lambda2)->(0,1), and the heralded OAM pair
        (-l-2, -l)->(0,1) on photon B (photon A keeps (l, l-2)->(0, 1))."""
        return cls(pol={"R": 0, "L": 1},
                   wavelength={Wavelength.LAMBDA1: 0, Wavelength.LAMBDA2: 1},
                   oam_a={l: 0, l - 2: 1},
                   oam_b={-l - 2: 0, -l: 1})

    def bit(self, photon: Photon, dof: str, value) -> int:
        table = {"pol": self.pol, "wavelength": self.wavelength,
                 "oam": self.oam_a if photon is Photon.A else self.oam_b}[dof]
        if value not in table:
            raise ValueError(f"no logical assignment for {photon.value}.{dof} "
                             f"value {value!r}")
        return table[value]


def logical_map(state: PureState, mapping: LogicalMapping
                ) -> tuple[np.ndarray, list[str]]:
    """Relabel a state into the computational basis.

    Qubits are ordered photon A before photon B and (wavelength, pol, oam)
    within a photon; only DOFs present in the state contribute.  Returns the
    amplitude vector over all bitstrings and the slot names.
    """
    slots: list[tuple[Photon, str]] = []
    for key in state.amplitudes:
        slots = [(lbl.photon, dof) for lbl in key for dof in _DOF_ORDER
                 if getattr(lbl, dof) is not None]
        break
    if not slots:
        raise ValueError("empty state")
    n = len(slots)
    vec = np.zeros(2 ** n, dtype=complex)
    for key, amp in state.amplitudes.items():
        bits = []
        for photon, dof in slots:
            lbl = next(l for l in key if l.photon is photon)
            bits.append(mapping.bit(photon, dof, getattr(lbl, dof)))
        idx = int("".join(map(str, bits)), 2)
        vec[idx] += amp
    return vec, [f"{p.value}.{d}" for p, d in slots]


def ghz_target(n_qubits: int = 3) -> np.ndarray:
    v = np.zeros(2 ** n_qubits, dtype=complex)
    v[0] = v[-1] = 1.0 / math.sqrt(2.0)
    return v


def ghz_fidelity(state) -> float:
    """Overlap with (|00...0> + |11...1>)/sqrt2.

    Accepts an amplitude vector or a density matrix of matching dimension.
    """
    arr = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state)
    if arr.ndim == 1:
        n = int(math.log2(arr.size))
        if 2 ** n != arr.size:
            raise ValueError(f"not a qubit register: size {arr.size}")
        return float(abs(np.vdot(ghz_target(n), arr)) ** 2)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        n = int(math.log2(arr.shape[0]))
        if 2 ** n != arr.shape[0]:
            raise ValueError(f"not a qubit register: dim {arr.shape[0]}")
        t = ghz_target(n)
        return float(np.real(np.vdot(t, arr @ t)))
    raise ValueError("state must be a vector or a square matrix")


def wavelength_marginal(state: PureState, photon: Photon = Photon.A) -> DensityMatrix:
    """Reduced spectral state of one photon."""
    rho = density_from_pure(state)
    return partial_trace(rho, [f"{photon.value}.wavelength"])


def marginal_trace_distance_from_mixed(marginal: DensityMatrix) -> float:
    """Trace distance of a marginal from the maximally mixed state."""
    d = marginal.dim
    diff = marginal.matrix - np.eye(d) / d
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())
