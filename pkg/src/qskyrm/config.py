"""Central numeric tolerances and physical constants."""
from __future__ import annotations

from dataclasses import dataclass

PUMP_NM = 532.0
LAMBDA1_NM = 1550.0
LAMBDA2_NM = 810.0

#: default truncation of the orbital-angular-momentum ladder
ELL_MAX = 6


@dataclass(frozen=True)
class Tolerances:
    """All validation tolerances in one place."""

    hermiticity: float = 1e-10
    psd_floor: float = -1e-9
    trace: float = 1e-10
    norm: float = 1e-12
    prune_eps: float = 1e-14
    p_floor: float = 1e-12
    idempotency: float = 1e-10


DEFAULT_TOL = Tolerances()


def check_energy_conservation(l1_nm: float = LAMBDA1_NM,
                              l2_nm: float = LAMBDA2_NM,
                              pump_nm: float = PUMP_NM,
                              tol: float = 1e-6) -> None:
    """Validate 1/l1 + 1/l2 == 1/pump to within ``tol`` (in 1/nm)."""
    gap = abs(1.0 / l1_nm + 1.0 / l2_nm - 1.0 / pump_nm)
    if gap >= tol:
        raise ValueError(
            f"wavelength pair ({l1_nm}, {l2_nm}) violates energy conservation "
            f"against pump {pump_nm} nm by {gap:.3e} nm^-1")
