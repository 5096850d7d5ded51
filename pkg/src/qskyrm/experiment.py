"""Optical pipeline: photon-pair source, spectral resolution, fiber
projection, heralding, coincidence statistics and the CHSH figure of merit.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import DEFAULT_TOL
from .hilbert import (BasisLabel, CompositionError, DensityMatrix, Photon,
                      ProjectorOp, PureState, Wavelength, project)

ARMS_DEFAULT = {Photon.A: Wavelength.LAMBDA1, Photon.B: Wavelength.LAMBDA2}


@dataclass(frozen=True)
class SourceSpectrum:
    """Joint amplitudes c[(l, k)] of the down-converted pair.

    ``l`` is photon A's OAM; ``k`` in {1, 2} selects which spectral channel
    photon A occupies (photon B takes the conjugate channel).
    """

    amplitudes: Mapping[tuple[int, int], complex]

    def __post_init__(self):
        total = sum(abs(a) ** 2 for a in self.amplitudes.values())
        if abs(total - 1.0) > DEFAULT_TOL.norm:
            raise ValueError(f"spectrum norm {total:.6g} != 1")
        for (_, k) in self.amplitudes:
            if k not in (1, 2):
                raise ValueError(f"spectral index must be 1 or 2, got {k}")

    @classmethod
    def uniform(cls, ls: Sequence[int], ks: Sequence[int] = (1, 2)) -> "SourceSpectrum":
        n = len(ls) * len(ks)
        return cls({(l, k): 1.0 / math.sqrt(n) for l in ls for k in ks})

    @classmethod
    def gaussian(cls, sigma_l: float, ell_max: int = 6,
                 ks: Sequence[int] = (1, 2), step: int = 2) -> "SourceSpectrum":
        """Gaussian-in-l envelope over the even ladder, equal channel weights."""
        ls = range(-ell_max, ell_max + 1, step)
        w = {(l, k): math.exp(-l * l / (2.0 * sigma_l ** 2))
             for l in ls for k in ks}
        z = math.sqrt(sum(v * v for v in w.values()))
        return cls({lk: v / z for lk, v in w.items()})

    @classmethod
    def single(cls, l: int, k: int = 1) -> "SourceSpectrum":
        return cls({(l, k): 1.0})


_CHANNEL = {1: Wavelength.LAMBDA1, 2: Wavelength.LAMBDA2}


def spdc_state(spec: SourceSpectrum, pump_pol: str = "R") -> PureState:
    """Two-photon state with anti-correlated OAM and conjugate wavelengths.

    Both photons carry the circular polarization selected by the preparation
    wave plate (``pump_pol`` in {"R", "L"}).
    """
    if pump_pol not in ("R", "L"):
        raise ValueError("pump_pol must be 'R' or 'L'")
    amps = {}
    for (l, k), c in spec.amplitudes.items():
        wl = _CHANNEL[k]
        key = (BasisLabel(Photon.A, oam=l, pol=pump_pol, wavelength=wl),
               BasisLabel(Photon.B, oam=-l, pol=pump_pol, wavelength=wl.partner))
        amps[key] = c
    return PureState(amps)


def resolve_wavelength(state: PureState,
                       arms: Mapping[Photon, Wavelength] | None = None
                       ) -> tuple[PureState, float]:
    """Dichroic separation: project each photon onto its arm's channel.

    Returns the renormalized single-branch state (wavelength labels dropped)
    and the branch probability.  Raises NullOutcome if the branch is empty.
    """
    arms = dict(ARMS_DEFAULT if arms is None else arms)
    out, p = state, 1.0
    for photon, wl in arms.items():
        if photon not in out.photons:
            continue
        out, pk = out.collapse_dof(photon, "wavelength", wl)
        p *= pk
    return out, p


def smf_project(state: PureState, photon: Photon | str) -> tuple[PureState, float]:
    """Single-mode-fiber coupling: collapse one photon's OAM to l = 0."""
    return state.collapse_dof(photon, "oam", 0)


def herald(state: PureState, photon: Photon | str,
           pol_setting) -> tuple[PureState, float]:
    """Polarization measurement on one photon; returns the conditional state
    of the remaining degrees of freedom and the outcome probability."""
    return state.collapse_dof(photon, "pol", pol_setting)


# ---------------------------------------------------------------------------
# coincidence probabilities and counting statistics


def coincidence_probability(state, proj_a: ProjectorOp,
                            proj_b: ProjectorOp) -> float:
    """p = Tr[(P_a x P_b) rho] for projectors on disjoint subsystems."""
    if set(proj_a.slots) & set(proj_b.slots):
        raise CompositionError(
            f"projectors overlap on slots {set(proj_a.slots) & set(proj_b.slots)}")
    if isinstance(state, DensityMatrix):
        ma = proj_a.embedded(state.slots, state.basis)
        mb = proj_b.embedded(state.slots, state.basis)
        p = float(np.real(np.trace(ma @ mb @ state.matrix)))
        return min(max(p, 0.0), 1.0)
    if isinstance(state, PureState):
        try:
            st, pa = project(state, proj_a)
            _, pb = project(st, proj_b)
        except Exception as exc:
            from .hilbert import NullOutcome
            if isinstance(exc, NullOutcome):
                return 0.0
            raise
        return min(max(pa * pb, 0.0), 1.0)
    raise TypeError(f"unsupported state type {type(state)!r}")


@dataclass(frozen=True)
class CountRecord:
    setting_a: str
    setting_b: str
    counts: int
    integration_s: float
    window_ns: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.counts < 0:
            raise ValueError(f"counts must be non-negative, got {self.counts}")


def simulate_counts(p: float, rate_max: float, integration_s: float,
                    accidental_rate: float = 0.0, seed: int = 0,
                    setting_a: str = "", setting_b: str = "",
                    window_ns: float = 3.0) -> CountRecord:
    """Poisson coincidence counts with mean
    ``p * rate_max * integration_s + accidental_rate * integration_s``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    if rate_max < 0 or accidental_rate < 0 or integration_s < 0:
        raise ValueError("rates and integration time must be non-negative")
    mean = p * rate_max * integration_s + accidental_rate * integration_s
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(mean)) if mean > 0 else 0
    return CountRecord(setting_a, setting_b, n, integration_s, window_ns, seed)


def derive_seed(master: int, *parts) -> int:
    """Stable per-setting seed so parallel evaluation order cannot matter."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr((master,) + tuple(parts)).encode())
    return int.from_bytes(h.digest(), "big")


COUNTS_HEADER = ["setting_a", "setting_b", "counts", "integration_s",
                 "window_ns", "seed"]


def write_counts_csv(records: Iterable[CountRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COUNTS_HEADER)
        for r in records:
            w.writerow([r.setting_a, r.setting_b, r.counts,
                        f"{r.integration_s:.17g}", f"{r.window_ns:.17g}",
                        r.seed])


def read_counts_csv(path) -> list[CountRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COUNTS_HEADER:
            raise ValueError(
                f"expected header {COUNTS_HEADER}, got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                counts = int(row["counts"])
            except ValueError:
                raise ValueError(f"row {i}: counts {row['counts']!r} not an integer")
            if counts < 0:
                raise ValueError(f"row {i}: negative counts {counts}")
            records.append(CountRecord(
                row["setting_a"], row["setting_b"], counts,
                float(row["integration_s"]), float(row["window_ns"]),
                int(row["seed"])))
    return records


# ---------------------------------------------------------------------------
# CHSH


def bell_state_oam(l: int = 2) -> PureState:
    """Symmetric OAM Bell state (|+l,-l> + |-l,+l>)/sqrt2."""
    return PureState({
        (BasisLabel(Photon.A, oam=l), BasisLabel(Photon.B, oam=-l)): 2 ** -0.5,
        (BasisLabel(Photon.A, oam=-l), BasisLabel(Photon.B, oam=l)): 2 ** -0.5,
    })


def werner_state(l: int = 2, visibility: float = 1.0) -> DensityMatrix:
    """Bell state mixed with white noise at the given visibility."""
    from .hilbert import density_from_pure
    rho = density_from_pure(bell_state_oam(l))
    m = visibility * rho.matrix + (1 - visibility) * np.eye(rho.dim) / rho.dim
    return DensityMatrix(m, rho.slots, rho.basis)


def theta_id(theta: float, perp: bool = False) -> str:
    return f"t{theta:.9f}" + ("x" if perp else "")


def oam_theta_projector(photon: Photon | str, theta: float,
                        l: int = 2, perp: bool = False) -> ProjectorOp:
    """Analyzer ket (|+l> + e^{2i theta}|-l>)/sqrt2 on one photon's OAM.

    The orthogonal outcome is the theta + pi/2 analyzer.
    """
    photon = Photon(photon)
    if perp:
        theta = theta + math.pi / 2.0
    ketv = np.array([1.0, np.exp(2j * theta)]) / math.sqrt(2.0)
    return ProjectorOp.from_ket(
        theta_id(theta - (math.pi / 2.0 if perp else 0.0), perp),
        (f"{photon.value}.oam",), ((l,), (-l,)), ketv,
        descriptor=f"OAM analyzer theta={theta:.6f} on photon {photon.value}")


CHSH_SETTINGS = (0.0, math.pi / 4, math.pi / 8, 3 * math.pi / 8)  # a, a', b, b'

#: the four analyzer angles used for photon A's measurement bank
CHSH_THETAS_A = (0.0, math.pi / 8, math.pi / 4, 3 * math.pi / 8)


def chsh_setting_pairs(a: float = CHSH_SETTINGS[0], a_prime: float = CHSH_SETTINGS[1],
                       b: float = CHSH_SETTINGS[2], b_prime: float = CHSH_SETTINGS[3]):
    """The 16 (theta_a, perp_a, theta_b, perp_b) combinations of a CHSH run."""
    pairs = []
    for ta in (a, a_prime):
        for tb in (b, b_prime):
            for pa in (False, True):
                for pb in (False, True):
                    pairs.append((ta, pa, tb, pb))
    return pairs


def chsh_probabilities(state, l: int = 2, settings=None) -> dict:
    """Joint projection probabilities for all 16 CHSH analyzer combinations."""
    out = {}
    pairs = chsh_setting_pairs(*(settings or CHSH_SETTINGS))
    for ta, pa, tb, pb in pairs:
        proj_a = oam_theta_projector(Photon.A, ta, l, perp=pa)
        proj_b = oam_theta_projector(Photon.B, tb, l, perp=pb)
        out[(theta_id(ta, pa), theta_id(tb, pb))] = \
            coincidence_probability(state, proj_a, proj_b)
    return out


def _correlation(values: Mapping, ta: float, tb: float) -> float:
    c_pp = values[(theta_id(ta), theta_id(tb))]
    c_xx = values[(theta_id(ta, True), theta_id(tb, True))]
    c_px = values[(theta_id(ta), theta_id(tb, True))]
    c_xp = values[(theta_id(ta, True), theta_id(tb))]
    total = c_pp + c_xx + c_px + c_xp
    if total <= 0:
        raise ValueError(f"empty correlation block at ({ta}, {tb})")
    return (c_pp + c_xx - c_px - c_xp) / total


def chsh_from_values(values: Mapping, settings=None) -> float:
    """S from 16 coincidence values (probabilities or counts).

    S = E(a,b) - E(a,b') + E(a',b) + E(a',b').
    """
    a, a_p, b, b_p = settings or CHSH_SETTINGS
    required = {(theta_id(ta, pa), theta_id(tb, pb))
                for ta, pa, tb, pb in chsh_setting_pairs(a, a_p, b, b_p)}
    missing = required - set(values)
    if missing:
        raise ValueError(f"missing CHSH settings: {sorted(missing)[:4]}...")
    return (_correlation(values, a, b) - _correlation(values, a, b_p)
            + _correlation(values, a_p, b) + _correlation(values, a_p, b_p))


def chsh(state, l: int = 2, settings=None) -> float:
    """CHSH parameter of a state in the +/-l OAM qubit pair."""
    return chsh_from_values(chsh_probabilities(state, l, settings), settings)


def chsh_from_counts(records: Iterable[CountRecord], settings=None) -> float:
    values = {}
    for r in records:
        key = (r.setting_a, r.setting_b)
        if key in values:
            raise ValueError(f"duplicate CHSH setting {key}")
        values[key] = r.counts
    return chsh_from_values(values, settings)


def simulate_chsh_counts(state, rate_max: float = 2000.0,
                         integration_s: float = 125.0, seed: int = 0,
                         l: int = 2, accidental_rate: float = 0.0,
                         settings=None) -> list[CountRecord]:
    """Poisson counts for all 16 analyzer combinations, one seed per setting."""
    probs = chsh_probabilities(state, l, settings)
    records = []
    for (ida, idb), p in probs.items():
        records.append(simulate_counts(
            p, rate_max, integration_s, accidental_rate,
            seed=derive_seed(seed, ida, idb), setting_a=ida, setting_b=idb))
    return records


def chsh_scan(state, theta_b_grid: Sequence[float], l: int = 2) -> np.ndarray:
    """S evaluated with b scanned and b' = b + pi/4 (a = 0, a' = pi/4)."""
    out = []
    for tb in theta_b_grid:
        out.append(chsh(state, l, settings=(0.0, math.pi / 4, tb,
                                            tb + math.pi / 4)))
    return np.array(out)
