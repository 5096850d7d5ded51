"""Finite-dimensional state algebra for photon pairs with OAM, polarization
and wavelength degrees of freedom.

States are sparse maps from tuples of :class:`BasisLabel` (one label per
photon present) to complex amplitudes.  A label only carries the degrees of
freedom that are still part of the state; projections that fix a degree of
freedom can drop it, which keeps downstream states small.

Density matrices are dense and carry an explicit ordered basis, expressed as
value tuples over named slots such as ``"A.pol"`` or ``"B.oam"``.
"""
from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import DEFAULT_TOL, ELL_MAX, LAMBDA1_NM, LAMBDA2_NM, Tolerances


class Photon(str, enum.Enum):
    A = "A"
    B = "B"

    def __str__(self) -> str:
        return self.value


class Wavelength(enum.Enum):
    """Spectral channel of the photon pair; values are nm."""

    LAMBDA1 = LAMBDA1_NM
    LAMBDA2 = LAMBDA2_NM

    @property
    def nm(self) -> float:
        return self.value

    @property
    def partner(self) -> "Wavelength":
        return Wavelength.LAMBDA2 if self is Wavelength.LAMBDA1 else Wavelength.LAMBDA1


_SQ2 = 1.0 / math.sqrt(2.0)

#: circular basis kets, coordinates in (R, L) order
POL_BASIS = ("R", "L")

#: fixed linear-polarization phase convention:
#: H = (R+L)/sqrt2, V = (R-L)/(i sqrt2), D = (H+V)/sqrt2, A = (H-V)/sqrt2
POL_KETS: dict[str, np.ndarray] = {
    "R": np.array([1.0, 0.0], dtype=complex),
    "L": np.array([0.0, 1.0], dtype=complex),
    "H": np.array([_SQ2, _SQ2], dtype=complex),
    "V": np.array([-1j * _SQ2, 1j * _SQ2], dtype=complex),
}
POL_KETS["D"] = (POL_KETS["H"] + POL_KETS["V"]) * _SQ2
POL_KETS["A"] = (POL_KETS["H"] - POL_KETS["V"]) * _SQ2

# Pauli matrices in the (R, L) basis; Stokes components are S_k = Tr[rho sigma_k]
SIGMA = {
    0: np.eye(2, dtype=complex),
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}

_DOF_ORDER = {"wavelength": 0, "pol": 1, "oam": 2}
_POL_ORDER = {"R": 0, "L": 1}
_WL_ORDER = {Wavelength.LAMBDA1: 0, Wavelength.LAMBDA2: 1}


class CompositionError(ValueError):
    """Raised when states or operators are combined inconsistently."""


class NullOutcome(Exception):
    """A projection whose probability fell below the configured floor."""

    def __init__(self, probability: float):
        super().__init__(f"projection probability {probability:.3e} below floor")
        self.probability = probability


class TruncationError(ValueError):
    """An operation would push an OAM index beyond the configured ladder."""


@dataclass(frozen=True, order=False)
class BasisLabel:
    """One photon's ket label; fields set to None are absent from the state."""

    photon: Photon
    oam: int | None = None
    pol: str | None = None
    wavelength: Wavelength | None = None

    def __post_init__(self):
        if self.pol is not None and self.pol not in POL_BASIS:
            raise ValueError(f"pol must be one of {POL_BASIS}, got {self.pol!r}")
        if self.oam is not None and not isinstance(self.oam, int):
            raise ValueError("oam must be an integer")

    @property
    def shape(self) -> tuple[str, ...]:
        """Names of the degrees of freedom this label carries."""
        return tuple(d for d in ("wavelength", "pol", "oam")
                     if getattr(self, d) is not None)

    def replace(self, **kw) -> "BasisLabel":
        fields = {"photon": self.photon, "oam": self.oam, "pol": self.pol,
                  "wavelength": self.wavelength}
        fields.update(kw)
        return BasisLabel(**fields)

    def sort_key(self):
        return (self.photon.value,
                -1 if self.wavelength is None else _WL_ORDER[self.wavelength],
                -1 if self.pol is None else _POL_ORDER[self.pol],
                math.inf if self.oam is None else self.oam)

    def __repr__(self):
        parts = []
        if self.oam is not None:
            parts.append(f"l={self.oam:+d}")
        if self.pol is not None:
            parts.append(self.pol)
        if self.wavelength is not None:
            parts.append(f"{self.wavelength.nm:g}nm")
        return f"|{','.join(parts)}>_{self.photon.value}"


def ket(photon: Photon | str, oam: int | None = None, pol: str | None = None,
        wavelength: Wavelength | None = None) -> "PureState":
    """Single-photon basis ket as a normalized PureState."""
    label = BasisLabel(Photon(photon), oam=oam, pol=pol, wavelength=wavelength)
    return PureState({(label,): 1.0})


StateKey = tuple[BasisLabel, ...]


class PureState:
    """Sparse multi-photon state: amplitude map over tuples of BasisLabel.

    Immutable by convention; every operation returns a new instance.  All
    keys must address the same photons with the same per-photon label shape.
    """

    def __init__(self, amplitudes: Mapping[StateKey, complex], *,
                 tol: Tolerances = DEFAULT_TOL, ell_max: int = ELL_MAX):
        self.tol = tol
        self.ell_max = ell_max
        amps: dict[StateKey, complex] = {}
        for key, a in amplitudes.items():
            a = complex(a)
            if abs(a) < tol.prune_eps:
                continue
            key = tuple(sorted(key, key=BasisLabel.sort_key))
            amps[key] = amps.get(key, 0.0) + a
        self._amps = {k: a for k, a in amps.items() if abs(a) >= tol.prune_eps}
        self._validate()

    # -- construction helpers ------------------------------------------------

    def _validate(self):
        shapes: dict[Photon, tuple[str, ...]] = {}
        photons: tuple[Photon, ...] | None = None
        for key in self._amps:
            ph = tuple(lbl.photon for lbl in key)
            if len(set(ph)) != len(ph):
                raise CompositionError(f"duplicate photon in key {key}")
            if photons is None:
                photons = ph
            elif ph != photons:
                raise CompositionError(
                    f"inconsistent photon content: {ph} vs {photons}")
            for lbl in key:
                if lbl.oam is not None and abs(lbl.oam) > self.ell_max:
                    raise TruncationError(
                        f"|l|={abs(lbl.oam)} exceeds ell_max={self.ell_max}")
                prev = shapes.setdefault(lbl.photon, lbl.shape)
                if lbl.shape != prev:
                    raise CompositionError(
                        f"inconsistent label shape for photon {lbl.photon}")
        self._photons = photons or ()
        self._shapes = shapes

    @property
    def photons(self) -> tuple[Photon, ...]:
        return self._photons

    @property
    def amplitudes(self) -> dict[StateKey, complex]:
        return dict(self._amps)

    def dof_slots(self) -> tuple[str, ...]:
        """Named (photon, dof) slots, in canonical order."""
        slots = []
        for ph in sorted(self._shapes, key=lambda p: p.value):
            for dof in sorted(self._shapes[ph], key=_DOF_ORDER.get):
                slots.append(f"{ph.value}.{dof}")
        return tuple(slots)

    # -- algebra -------------------------------------------------------------

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    def normalized(self) -> "PureState":
        n = self.norm()
        if n == 0.0:
            raise NullOutcome(0.0)
        return PureState({k: a / n for k, a in self._amps.items()},
                         tol=self.tol, ell_max=self.ell_max)

    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) <= self.tol.norm

    def scaled(self, c: complex) -> "PureState":
        return PureState({k: a * c for k, a in self._amps.items()},
                         tol=self.tol, ell_max=self.ell_max)

    def overlap(self, other: "PureState") -> complex:
        """<self|other>, requiring identical photon/DOF structure."""
        if self.dof_slots() != other.dof_slots():
            raise CompositionError("overlap between differently shaped states")
        return sum(np.conj(a) * other._amps.get(k, 0.0)
                   for k, a in self._amps.items())

    def map_amplitudes(self, fn) -> "PureState":
        """Apply ``fn(key, amp) -> iterable[(key, amp)]`` to every term."""
        out: dict[StateKey, complex] = {}
        for key, a in self._amps.items():
            for k2, a2 in fn(key, a):
                k2 = tuple(sorted(k2, key=BasisLabel.sort_key))
                out[k2] = out.get(k2, 0.0) + a2
        return PureState(out, tol=self.tol, ell_max=self.ell_max)

    def __repr__(self):
        terms = sorted(self._amps.items(),
                       key=lambda kv: [l.sort_key() for l in kv[0]])
        body = " + ".join(f"({a:.4g})" + "".join(map(repr, k)) for k, a in terms)
        return f"PureState[{body or '0'}]"

    # -- projections ---------------------------------------------------------

    def project_dof(self, photon: Photon | str, dof: str,
                    target: Mapping | np.ndarray | object,
                    *, renormalize: bool = True) -> tuple["PureState", float]:
        """Project one photon's degree of freedom onto a (possibly
        superposed) ket and return ``(state, probability)``.

        ``target`` is a mapping from DOF values to amplitudes, a polarization
        name from POL_KETS, or a single DOF value.  Raises NullOutcome when
        the probability falls below the configured floor.
        """
        photon = Photon(photon)
        tgt = _as_dof_ket(dof, target)
        if photon not in self._photons:
            raise CompositionError(f"photon {photon} not present in state")
        if dof not in self._shapes[photon]:
            raise CompositionError(f"photon {photon} carries no '{dof}' label")

        out: dict[StateKey, complex] = {}
        for key, a in self._amps.items():
            lbl = next(l for l in key if l.photon is photon)
            c = tgt.get(getattr(lbl, dof))
            if c is None:
                continue
            # P|psi> keeps the projected DOF in the target ket
            w = np.conj(c) * a
            for v, cv in tgt.items():
                k2 = tuple(l if l is not lbl else lbl.replace(**{dof: v})
                           for l in key)
                out[k2] = out.get(k2, 0.0) + w * cv
        projected = PureState(out, tol=self.tol, ell_max=self.ell_max)
        p = projected.norm() ** 2
        if p < self.tol.p_floor:
            raise NullOutcome(p)
        return (projected.normalized() if renormalize else projected), p

    def factor_out(self, photon: Photon | str, dof: str) -> "PureState":
        """Remove a degree of freedom that is in a fixed (product) state.

        Valid when the state factorizes as ``|chi>_dof (x) |rest>``; raises
        CompositionError otherwise.
        """
        photon = Photon(photon)
        if photon not in self._photons or dof not in self._shapes[photon]:
            raise CompositionError(f"photon {photon} has no '{dof}' label")
        groups: dict[StateKey, dict] = {}
        for key, a in self._amps.items():
            lbl = next(l for l in key if l.photon is photon)
            stripped = tuple(l if l is not lbl else lbl.replace(**{dof: None})
                             for l in key)
            stripped = tuple(l for l in stripped if l.shape)
            groups.setdefault(stripped, {})[getattr(lbl, dof)] = a
        # all groups must carry proportional sub-kets
        ref_key = max(groups, key=lambda k: sum(abs(v) ** 2
                                                for v in groups[k].values()))
        ref = groups[ref_key]
        ref_norm = math.sqrt(sum(abs(v) ** 2 for v in ref.values()))
        ref = {v: a / ref_norm for v, a in ref.items()}
        out: dict[StateKey, complex] = {}
        for key, sub in groups.items():
            if set(sub) - set(ref):
                raise CompositionError(
                    f"'{photon.value}.{dof}' does not factor out of the state")
            coeffs = [sub.get(v, 0.0) / ref[v] for v in ref]
            c0 = coeffs[0]
            if max(abs(c - c0) for c in coeffs) > 1e-9 * max(1.0, abs(c0)):
                raise CompositionError(
                    f"'{photon.value}.{dof}' does not factor out of the state")
            out[key] = c0
        return PureState(out, tol=self.tol, ell_max=self.ell_max)

    def collapse_dof(self, photon: Photon | str, dof: str, target,
                     *, drop: bool = True) -> tuple["PureState", float]:
        """project_dof followed by factoring the now-definite DOF out."""
        state, p = self.project_dof(photon, dof, target)
        if drop:
            state = state.factor_out(photon, dof)
        return state, p


def _as_dof_ket(dof: str, target) -> dict:
    if isinstance(target, Mapping):
        return dict(target)
    if dof == "pol" and isinstance(target, str):
        vec = POL_KETS.get(target)
        if vec is None:
            raise ValueError(f"unknown polarization setting {target!r}")
        return {"R": vec[0], "L": vec[1]}
    return {target: 1.0}


def tensor(a: PureState, b: PureState) -> PureState:
    """Tensor product of states on disjoint photons."""
    if set(a.photons) & set(b.photons):
        raise CompositionError(
            f"tensor of states sharing photons {set(a.photons) & set(b.photons)}")
    out = {}
    for ka, va in a.amplitudes.items():
        for kb, vb in b.amplitudes.items():
            out[ka + kb] = va * vb
    return PureState(out, tol=a.tol, ell_max=max(a.ell_max, b.ell_max))


# ---------------------------------------------------------------------------
# projectors


@dataclass(frozen=True)
class ProjectorOp:
    """Hermitian idempotent operator on a declared, labelled subspace.

    ``slots`` names the addressed (photon-)DOF coordinates; ``basis`` lists
    the value tuples spanning the subspace, aligned with ``matrix``.
    """

    id: str
    matrix: np.ndarray
    slots: tuple[str, ...]
    basis: tuple[tuple, ...]
    descriptor: str = ""

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.shape != (len(self.basis), len(self.basis)):
            raise ValueError("projector matrix does not match its basis")
        if np.max(np.abs(m - m.conj().T)) > DEFAULT_TOL.hermiticity:
            raise ValueError(f"projector {self.id} is not Hermitian")
        if np.max(np.abs(m @ m - m)) > DEFAULT_TOL.idempotency:
            raise ValueError(f"projector {self.id} is not idempotent")

    @classmethod
    def from_ket(cls, id: str, slots: Sequence[str], basis: Sequence[tuple],
                 amplitudes: Sequence[complex], descriptor: str = "") -> "ProjectorOp":
        v = np.asarray(amplitudes, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(id, np.outer(v, v.conj()), tuple(slots),
                   tuple(tuple(b) for b in basis), descriptor)

    def embedded(self, slots: Sequence[str], basis: Sequence[tuple]) -> np.ndarray:
        """Matrix of this projector embedded in a larger product basis."""
        idx = [slots.index(s) for s in self.slots]
        missing = [s for s in self.slots if s not in slots]
        if missing:
            raise CompositionError(f"projector {self.id} addresses absent slots {missing}")
        own = {b: i for i, b in enumerate(self.basis)}
        n = len(basis)
        out = np.zeros((n, n), dtype=complex)
        for i, bi in enumerate(basis):
            ri = own.get(tuple(bi[k] for k in idx))
            if ri is None:
                continue
            resti = tuple(v for k, v in enumerate(bi) if k not in idx)
            for j, bj in enumerate(basis):
                rj = own.get(tuple(bj[k] for k in idx))
                if rj is None:
                    continue
                restj = tuple(v for k, v in enumerate(bj) if k not in idx)
                if resti == restj:
                    out[i, j] = self.matrix[ri, rj]
        return out


def project(state: PureState, proj: ProjectorOp,
            *, renormalize: bool = True) -> tuple[PureState, float]:
    """Apply a ProjectorOp to a PureState; returns (state, probability).

    The projector's slots must be a subset of the state's slots; amplitude
    outside the projector's declared basis is annihilated.
    """
    slots = state.dof_slots()
    for s in proj.slots:
        if s not in slots:
            raise CompositionError(
                f"projector {proj.id} addresses slot {s} absent from state")

    def coords(key: StateKey) -> tuple:
        vals = []
        for s in proj.slots:
            ph, dof = s.split(".")
            lbl = next(l for l in key if l.photon.value == ph)
            vals.append(getattr(lbl, dof))
        return tuple(vals)

    own = {b: i for i, b in enumerate(proj.basis)}

    def fn(key, a):
        ci = own.get(coords(key))
        if ci is None:
            return
        for cj, j in own.items():
            w = proj.matrix[j, ci] * a
            if w == 0.0:
                continue
            k2 = list(key)
            for s, v in zip(proj.slots, cj):
                ph, dof = s.split(".")
                for n, lbl in enumerate(k2):
                    if lbl.photon.value == ph:
                        k2[n] = lbl.replace(**{dof: v})
            yield tuple(k2), w

    projected = state.map_amplitudes(fn)
    p = projected.norm() ** 2
    if p < state.tol.p_floor:
        raise NullOutcome(p)
    return (projected.normalized() if renormalize else projected), p


# ---------------------------------------------------------------------------
# density matrices


_VALUE_ORDER = {
    "pol": lambda v: _POL_ORDER[v],
    "wavelength": lambda v: _WL_ORDER[v] if isinstance(v, Wavelength) else v,
    "oam": lambda v: v,
}


def _slot_value_key(slot: str, v):
    dof = slot.split(".")[-1]
    return _VALUE_ORDER.get(dof, lambda x: x)(v)


class DensityMatrix:
    """Hermitian, PSD, trace-one operator over an explicit ordered basis."""

    def __init__(self, matrix: np.ndarray, slots: Sequence[str],
                 basis: Sequence[tuple], *, tol: Tolerances = DEFAULT_TOL,
                 validate: bool = True):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.slots = tuple(slots)
        self.basis = tuple(tuple(b) for b in basis)
        self.tol = tol
        if self.matrix.shape != (len(self.basis), len(self.basis)):
            raise ValueError("matrix shape does not match basis size")
        if len(set(self.basis)) != len(self.basis):
            raise ValueError("duplicate basis elements")
        if validate:
            self.validate()

    @property
    def dim(self) -> int:
        return len(self.basis)

    def validate(self) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > self.tol.hermiticity:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > self.tol.trace or \
                abs(np.trace(m).imag) > self.tol.trace:
            raise ValueError(f"trace {np.trace(m):.6g} != 1")
        w = np.linalg.eigvalsh(m)
        if w.min() < self.tol.psd_floor:
            raise ValueError(f"negative eigenvalue {w.min():.3e}")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def reordered(self, basis: Sequence[tuple]) -> "DensityMatrix":
        """Same operator with basis elements permuted into the given order."""
        basis = [tuple(b) for b in basis]
        if sorted(map(repr, basis)) != sorted(map(repr, self.basis)):
            raise CompositionError("reordering must permute the existing basis")
        perm = [self.basis.index(b) for b in basis]
        m = self.matrix[np.ix_(perm, perm)]
        return DensityMatrix(m, self.slots, basis, tol=self.tol, validate=False)

    def expectation(self, op: np.ndarray) -> float:
        return float(np.real(np.trace(op @ self.matrix)))

    # -- serialization (JSON: basis labels + row-major [re, im] entries) -----

    def to_json_dict(self) -> dict:
        return {
            "slots": list(self.slots),
            "basis": [[_value_to_json(v) for v in b] for b in self.basis],
            "entries": [[[float(z.real), float(z.imag)] for z in row]
                        for row in self.matrix],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @classmethod
    def from_json_dict(cls, d: dict, *, tol: Tolerances = DEFAULT_TOL) -> "DensityMatrix":
        slots = tuple(d["slots"])
        basis = [tuple(_value_from_json(s, v) for s, v in zip(slots, b))
                 for b in d["basis"]]
        m = np.array([[complex(re, im) for re, im in row]
                      for row in d["entries"]])
        return cls(m, slots, basis, tol=tol)

    @classmethod
    def from_json(cls, text: str, **kw) -> "DensityMatrix":
        return cls.from_json_dict(json.loads(text), **kw)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, slots={self.slots})"


def _value_to_json(v):
    if isinstance(v, Wavelength):
        return v.nm
    return v


def _value_from_json(slot: str, v):
    if slot.split(".")[-1] == "wavelength":
        return Wavelength(float(v))
    return v


def density_from_pure(state: PureState) -> DensityMatrix:
    """Rank-one density matrix of a normalized pure state.

    The basis is the full product of the per-slot value sets occurring in the
    state, ordered slot-major, so entangled states get the product-space
    matrix their tomography counterparts use.
    """
    if not state.is_normalized():
        raise ValueError(f"state norm {state.norm():.6g} != 1")
    slots = state.dof_slots()

    def coords(key: StateKey) -> tuple:
        vals = []
        for s in slots:
            ph, dof = s.split(".")
            lbl = next(l for l in key if l.photon.value == ph)
            vals.append(getattr(lbl, dof))
        return tuple(vals)

    amp = {coords(k): a for k, a in state.amplitudes.items()}
    per_slot = [sorted({b[i] for b in amp}, key=lambda v: _slot_value_key(s, v))
                for i, s in enumerate(slots)]
    basis = list(itertools.product(*per_slot))
    v = np.array([amp.get(b, 0.0) for b in basis], dtype=complex)
    return DensityMatrix(np.outer(v, v.conj()), slots, basis, tol=state.tol)


def partial_trace(rho: DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Trace out every slot not named in ``keep`` (order taken from ``keep``)."""
    keep = tuple(keep)
    for s in keep:
        if s not in rho.slots:
            raise CompositionError(f"slot {s} not present in {rho.slots}")
    kidx = [rho.slots.index(s) for s in keep]
    tidx = [i for i in range(len(rho.slots)) if i not in kidx]

    def split(b):
        return (tuple(b[i] for i in kidx), tuple(b[i] for i in tidx))

    parts = [split(b) for b in rho.basis]
    kept = sorted({k for k, _ in parts},
                  key=lambda b: tuple(_slot_value_key(s, v)
                                      for s, v in zip(keep, b)))
    pos = {b: i for i, b in enumerate(kept)}
    out = np.zeros((len(kept), len(kept)), dtype=complex)
    for i, (ki, ti) in enumerate(parts):
        for j, (kj, tj) in enumerate(parts):
            if ti == tj:
                out[pos[ki], pos[kj]] += rho.matrix[i, j]
    return DensityMatrix(out, keep, kept, tol=rho.tol)


def fidelity(rho: DensityMatrix, rho_t: DensityMatrix) -> float:
    """Uhlmann fidelity F = [Tr sqrt(sqrt(rho_t) rho sqrt(rho_t))]^2."""
    if rho.dim != rho_t.dim:
        raise CompositionError(f"dimension mismatch {rho.dim} != {rho_t.dim}")
    if rho.basis != rho_t.basis:
        raise CompositionError("fidelity requires identical basis ordering")
    w, v = np.linalg.eigh(rho_t.matrix)
    sq = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    mu = np.linalg.eigvalsh(sq @ rho.matrix @ sq)
    f = float(np.sum(np.sqrt(np.clip(mu, 0.0, None))) ** 2)
    return min(max(f, 0.0), 1.0)


def state_fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|^2 for pure states of identical structure."""
    return abs(a.overlap(b)) ** 2


def pol_matrix(values: Iterable[str]) -> np.ndarray:
    """Change-of-basis matrix whose columns are the named polarization kets."""
    return np.stack([POL_KETS[v] for v in values], axis=1)
