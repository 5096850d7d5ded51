"""Parametric model of the voltage-tuned liquid-crystal spin-orbit plate.

The plate is characterized by a birefringent retardation that grows with
applied voltage above a threshold and scales as 1/wavelength at fixed
voltage.  Conversion efficiency follows eta = sin^2(delta/2).  The default
profile is a two-anchor linear ramp calibrated so the reference wavelength
reaches full conversion (delta = pi) at ``v_full_reference``; a measured
(voltage, retardation) table can override the ramp.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Mapping

from .config import ELL_MAX, LAMBDA1_NM
from .hilbert import Photon, PureState, TruncationError, Wavelength


@dataclass(frozen=True)
class DeviceParams:
    q_charge: int = 1
    thickness_um: float = 10.0
    v_threshold: float = 2.0
    v_full_reference: float = 4.7
    reference_wavelength_nm: float = LAMBDA1_NM
    #: optional measured profile: ((V, delta_at_reference), ...) with strictly
    #: increasing V; linearly interpolated, clamped outside its range
    retardation_table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.v_full_reference <= self.v_threshold:
            raise ValueError("v_full_reference must exceed v_threshold")
        t = self.retardation_table
        if t is not None:
            vs = [v for v, _ in t]
            ds = [d for _, d in t]
            if sorted(vs) != vs or len(set(vs)) != len(vs):
                raise ValueError("table voltages must be strictly increasing")
            if any(d < 0 for d in ds) or any(b < a for a, b in zip(ds, ds[1:])):
                raise ValueError("table retardation must be non-negative and "
                                 "non-decreasing")


def load_retardation_table(path) -> tuple[tuple[float, float], ...]:
    """Read a retardation override table CSV.

    Expected header: ``voltage_V,delta_rad_at_1550nm`` with strictly
    increasing voltages.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["voltage_V", "delta_rad_at_1550nm"]
        if reader.fieldnames != expected:
            raise ValueError(f"expected header {expected}, got {reader.fieldnames}")
        rows = [(float(r["voltage_V"]), float(r["delta_rad_at_1550nm"]))
                for r in reader]
    if not rows:
        raise ValueError("empty retardation table")
    return tuple(rows)


def retardation(voltage: float, wavelength_nm: float,
                params: DeviceParams = DeviceParams()) -> float:
    """Birefringent retardation (radians) at the given voltage and wavelength.

    Thin-plate dispersion: delta(V, lam) = delta(V, lam_ref) * lam_ref / lam.
    """
    if voltage < 0:
        raise ValueError(f"voltage must be non-negative, got {voltage}")
    if wavelength_nm <= 0:
        raise ValueError("wavelength must be positive")
    t = params.retardation_table
    if t is None:
        ramp = (voltage - params.v_threshold) / \
               (params.v_full_reference - params.v_threshold)
        delta_ref = math.pi * max(ramp, 0.0)
    else:
        delta_ref = _interp_clamped(t, voltage)
    return delta_ref * params.reference_wavelength_nm / wavelength_nm


def _interp_clamped(table, v):
    if v <= table[0][0]:
        return table[0][1]
    if v >= table[-1][0]:
        return table[-1][1]
    for (v0, d0), (v1, d1) in zip(table, table[1:]):
        if v0 <= v <= v1:
            return d0 + (d1 - d0) * (v - v0) / (v1 - v0)
    raise AssertionError("unreachable")


def conversion_efficiency(voltage: float, wavelength_nm: float,
                          params: DeviceParams = DeviceParams()) -> float:
    """Spin-to-orbital conversion efficiency eta = sin^2(delta/2) in [0, 1]."""
    delta = retardation(voltage, wavelength_nm, params)
    return math.sin(delta / 2.0) ** 2


PHASE_CONVENTIONS = ("unitary", "real")


def apply_qplate(state: PureState, photon: Photon | str,
                 eta: float | Mapping[Wavelength, float],
                 phase_convention: str = "unitary",
                 q_charge: int = 1, ell_max: int = ELL_MAX) -> PureState:
    """Spin-orbit coupling on one photon.

    |l,R> -> sqrt(1-eta)|l,R> + i sqrt(eta)|l-2q,L>
    |l,L> -> sqrt(1-eta)|l,L> + i sqrt(eta)|l+2q,R>

    ``phase_convention="real"`` uses real coefficients instead; the map then preserves
    norm only on single-circular-polarization input sectors, which is all the
    source pipelines produce.  ``eta`` may be a single efficiency or a map
    from wavelength channel to efficiency (dispersive application to states
    that still carry both spectral branches).
    """
    if phase_convention not in PHASE_CONVENTIONS:
        raise ValueError(f"phase_convention must be one of {PHASE_CONVENTIONS}")
    photon = Photon(photon)
    if photon not in state.photons:
        raise ValueError(f"photon {photon} not present in state")
    etas = eta if isinstance(eta, Mapping) else None
    if etas is None:
        _check_eta(float(eta))
    else:
        for e in etas.values():
            _check_eta(float(e))
    cross = 1j if phase_convention == "unitary" else 1.0
    shift = 2 * q_charge

    def fn(key, a):
        lbl = next(l for l in key if l.photon is photon)
        if lbl.pol is None or lbl.oam is None:
            raise ValueError(f"photon {photon} must carry pol and oam labels")
        if etas is not None:
            if lbl.wavelength is None:
                raise ValueError("per-wavelength eta requires wavelength labels")
            e = float(etas[lbl.wavelength])
        else:
            e = float(eta)
        keep = math.sqrt(1.0 - e)
        conv = math.sqrt(e)
        if keep > 0.0:
            yield key, a * keep
        if conv > 0.0:
            l2 = lbl.oam - shift if lbl.pol == "R" else lbl.oam + shift
            if abs(l2) > ell_max:
                raise TruncationError(
                    f"conversion l={lbl.oam} -> l={l2} exceeds ell_max={ell_max}; "
                    "raise ell_max instead of truncating")
            p2 = "L" if lbl.pol == "R" else "R"
            yield (tuple(l if l is not lbl else lbl.replace(oam=l2, pol=p2)
                         for l in key)), a * conv * cross

    return state.map_amplitudes(fn)


def _check_eta(e: float) -> None:
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {e}")


def inverse_qplate(state: PureState, photon: Photon | str, eta: float,
                   q_charge: int = 1, ell_max: int = ELL_MAX) -> PureState:
    """Inverse of the unitary-convention plate (adjoint action)."""
    _check_eta(eta)
    photon = Photon(photon)
    shift = 2 * q_charge
    keep = math.sqrt(1.0 - eta)
    conv = math.sqrt(eta)

    def fn(key, a):
        lbl = next(l for l in key if l.photon is photon)
        if keep > 0.0:
            yield key, a * keep
        if conv > 0.0:
            l2 = lbl.oam - shift if lbl.pol == "R" else lbl.oam + shift
            if abs(l2) > ell_max:
                raise TruncationError(
                    f"inverse conversion exceeds ell_max={ell_max}")
            p2 = "L" if lbl.pol == "R" else "R"
            yield (tuple(l if l is not lbl else lbl.replace(oam=l2, pol=p2)
                         for l in key)), a * conv * (-1j)

    return state.map_amplitudes(fn)
