"""Projector-set construction and constrained density-matrix reconstruction.

Reconstruction runs linear inversion (trace-constrained least squares over a
Hermitian operator basis), projects the result onto the physical set
(positive semidefinite, unit trace) by eigenvalue redistribution, and can
refine with projected gradient descent on the squared-residual cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .experiment import CountRecord, read_counts_csv
from .hilbert import DensityMatrix, ProjectorOp

# ---------------------------------------------------------------------------
# projector sets

#: qubit six-pack: two basis kets plus the four equal-weight superpositions
#: (|0> + e^{i phi}|1>)/sqrt2, phi in {0, 90, 180, 270} degrees
_SIX = (
    ("k0", np.array([1.0, 0.0])),
    ("k1", np.array([0.0, 1.0])),
    ("s0", np.array([1.0, 1.0]) / math.sqrt(2)),
    ("s90", np.array([1.0, 1.0j]) / math.sqrt(2)),
    ("s180", np.array([1.0, -1.0]) / math.sqrt(2)),
    ("s270", np.array([1.0, -1.0j]) / math.sqrt(2)),
)

#: canonical ids of the polarization six-pack, matched to the same phases
_POL_IDS = {"k0": "R", "k1": "L", "s0": "H", "s90": "D", "s180": "V", "s270": "A"}


@dataclass(frozen=True)
class ProjectorSet:
    kind: str
    projectors: tuple[ProjectorOp, ...]
    slots: tuple[str, ...]
    basis: tuple[tuple, ...]

    def __len__(self):
        return len(self.projectors)

    def by_id(self) -> dict[str, ProjectorOp]:
        return {p.id: p for p in self.projectors}

    def matrices(self) -> np.ndarray:
        return np.stack([p.embedded(self.slots, self.basis)
                         for p in self.projectors])

    def completeness_constant(self) -> float:
        """c such that sum_i Tr[M_i rho] = c for every unit-trace rho.

        Requires sum_i M_i proportional to the identity, which holds for all
        the product six-pack sets used here.
        """
        total = self.matrices().sum(axis=0)
        c = float(np.real(np.trace(total))) / len(self.basis)
        if np.max(np.abs(total - c * np.eye(len(self.basis)))) > 1e-9:
            raise ValueError(f"projector set {self.kind} does not resolve the "
                             "identity; cannot normalize counts")
        return c


def _six_pack(kind: str, slot: str, basis: Sequence[tuple],
              ids: Mapping[str, str], labels: Mapping[str, str]) -> ProjectorSet:
    projs = []
    for key, vec in _SIX:
        projs.append(ProjectorOp.from_ket(
            ids[key], (slot,), basis, vec, descriptor=labels[key]))
    return ProjectorSet(kind, tuple(projs), (slot,), tuple(tuple(b) for b in basis))


def polarization6(slot: str = "pol") -> ProjectorSet:
    labels = {"k0": "right circular", "k1": "left circular",
              "s0": "horizontal", "s90": "diagonal", "s180": "vertical",
              "s270": "anti-diagonal"}
    return _six_pack("polarization6", slot, (("R",), ("L",)), _POL_IDS, labels)


#: canonical file-portable ids for the standard OAM pairs
_OAM_IDS = {(2, -2): ("p2", "m2"), (-2, -4): ("m2", "m4")}


def oam6(l_first: int, l_second: int, slot: str = "oam",
         kind: str | None = None, ids: Mapping[str, str] | None = None
         ) -> ProjectorSet:
    """Six OAM projectors over the {l_first, l_second} pair."""
    if l_first == l_second:
        raise ValueError("OAM pair must be distinct")
    if ids is None:
        k0, k1 = _OAM_IDS.get((l_first, l_second),
                              (f"l{l_first}", f"l{l_second}"))
        ids = {"k0": k0, "k1": k1,
               "s0": "s0", "s90": "s90", "s180": "s180", "s270": "s270"}
    labels = {
        "k0": f"OAM {l_first}", "k1": f"OAM {l_second}",
        "s0": "equal superposition phi=0", "s90": "equal superposition phi=pi/2",
        "s180": "equal superposition phi=pi", "s270": "equal superposition phi=3pi/2",
    }
    return _six_pack(kind or f"oam6_{l_first}_{l_second}", slot,
                     ((l_first,), (l_second,)), ids, labels)


def product_set(set_a: ProjectorSet, set_b: ProjectorSet,
                kind: str | None = None) -> ProjectorSet:
    """All pairwise joint projectors P_i (x) P_j of two single-subsystem sets."""
    if set(set_a.slots) & set(set_b.slots):
        raise ValueError("product of sets addressing the same slot")
    slots = set_a.slots + set_b.slots
    basis = tuple(ba + bb for ba in set_a.basis for bb in set_b.basis)
    projs = []
    for pa in set_a.projectors:
        for pb in set_b.projectors:
            m = np.kron(pa.matrix, pb.matrix)
            projs.append(ProjectorOp(f"{pa.id}*{pb.id}", m, slots, basis,
                                     descriptor=f"{pa.descriptor} x {pb.descriptor}"))
    return ProjectorSet(kind or f"{set_a.kind}*{set_b.kind}",
                        tuple(projs), slots, basis)


def projector_set(kind: str) -> ProjectorSet:
    """Named sets: polarization6, oam6_pm2, oam6_m2m4, hybrid36."""
    if kind == "polarization6":
        return polarization6()
    if kind == "oam6_pm2":
        return oam6(2, -2, kind=kind)
    if kind == "oam6_m2m4":
        return oam6(-2, -4, kind=kind)
    if kind == "hybrid36":
        return product_set(polarization6(), projector_set("oam6_m2m4"),
                           kind="hybrid36")
    raise ValueError(f"unknown projector set kind {kind!r}")


def hybrid36_for_modes(l_first: int, l_second: int,
                       pol_slot: str = "pol", oam_slot: str = "oam") -> ProjectorSet:
    """Polarization x OAM joint set for an arbitrary mode pair."""
    return product_set(polarization6(pol_slot),
                       oam6(l_first, l_second, oam_slot))


def gram_rank(pset: ProjectorSet, tol: float = 1e-9) -> int:
    """Rank of the set viewed as vectors in operator space."""
    mats = pset.matrices()
    design = mats.reshape(len(mats), -1)
    return int(np.linalg.matrix_rank(design, tol=tol))


# ---------------------------------------------------------------------------
# problems and probabilities


@dataclass
class TomoProblem:
    """Measurement probabilities on the Tr[M rho] scale, plus their set.

    ``weights`` (optional, relative) scale each squared residual in the
    cost; the default is the unweighted cost.
    """

    probabilities: np.ndarray
    pset: ProjectorSet
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if self.probabilities.shape != (len(self.pset),):
            raise ValueError("one probability per projector required")
        if self.probabilities.min() < -1e-12:
            raise ValueError(
                f"negative probability {self.probabilities.min():.3e}")
        self.probabilities = np.clip(self.probabilities, 0.0, None)
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.probabilities.shape or \
                    self.weights.min() <= 0:
                raise ValueError("weights must be positive, one per projector")
            self.weights = self.weights / self.weights.mean()

    @property
    def dim(self) -> int:
        return len(self.pset.basis)


def probabilities_from_state(rho: DensityMatrix, pset: ProjectorSet) -> TomoProblem:
    """Ideal outcome probabilities p_i = Tr[M_i rho]."""
    if rho.dim != len(pset.basis):
        raise ValueError(f"dimension mismatch: state {rho.dim}, "
                         f"set {len(pset.basis)}")
    target = rho if rho.basis == pset.basis else rho.reordered(pset.basis)
    mats = pset.matrices()
    p = np.real(np.einsum("kij,ji->k", mats, target.matrix))
    return TomoProblem(p, pset)


def normalize_counts(records: Sequence[CountRecord], pset: ProjectorSet,
                     per_group: bool = False,
                     variance_weighted: bool = False) -> TomoProblem:
    """Counts -> probabilities on the Tr[M rho] scale.

    Default normalization divides by the grand total and rescales by the
    set's completeness constant.  ``per_group`` instead normalizes each
    resolution-of-identity block (pairs of complete bases) to unit sum.
    ``variance_weighted`` weights residuals by the Poisson variance
    estimate 1/max(C_i, 1).
    """
    by_id = {}
    for r in records:
        key = (r.setting_a, r.setting_b) if r.setting_b else (r.setting_a,)
        sid = "*".join(key)
        if sid in by_id:
            raise ValueError(f"duplicate setting {sid!r}")
        by_id[sid] = r.counts
    ids = [p.id for p in pset.projectors]
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ValueError(f"settings missing from counts: {missing}")
    unknown = [i for i in by_id if i not in ids]
    if unknown:
        raise ValueError(f"unknown settings in counts: {unknown}")
    counts = np.array([by_id[i] for i in ids], dtype=float)
    weights = 1.0 / np.clip(counts, 1.0, None) if variance_weighted else None
    if per_group:
        mats = pset.matrices()
        probs = np.zeros_like(counts)
        remaining = set(range(len(ids)))
        while remaining:
            i = min(remaining)
            group = _identity_group(mats, i, remaining)
            total = counts[group].sum()
            if total <= 0:
                raise ValueError(f"empty counts in basis group {group}")
            probs[group] = counts[group] / total
            remaining -= set(group)
        return TomoProblem(probs, pset, weights)
    total = counts.sum()
    if total <= 0:
        raise ValueError("zero total counts")
    return TomoProblem(counts / total * pset.completeness_constant(), pset,
                       weights)


def _identity_group(mats, i, remaining):
    """Greedy search for a subset containing i that sums to the identity."""
    dim = mats.shape[1]
    acc = mats[i].copy()
    group = [i]
    for j in sorted(remaining - {i}):
        cand = acc + mats[j]
        w = np.linalg.eigvalsh(cand)
        if w.max() <= 1.0 + 1e-9:
            acc = cand
            group.append(j)
        if np.max(np.abs(acc - np.eye(dim))) < 1e-9:
            return group
    raise ValueError("projector set has no per-group identity decomposition")


# ---------------------------------------------------------------------------
# hermitian operator basis (traceless, orthonormal under Tr[A B])


_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_PAULI_NAMES = ("I", "X", "Y", "Z")


def hermitian_basis(dim: int) -> tuple[list[np.ndarray], list[str]]:
    """Orthonormal traceless Hermitian basis; Pauli products when dim = 4."""
    if dim == 4:
        ops, names = [], []
        for a in _PAULI_NAMES:
            for b in _PAULI_NAMES:
                if a == b == "I":
                    continue
                ops.append(np.kron(_PAULI[a], _PAULI[b]) / 2.0)
                names.append(f"{a}(x){b}")
        return ops, names
    ops, names = [], []
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = m[j, i] = 1 / math.sqrt(2)
            ops.append(m)
            names.append(f"sym({i},{j})")
            m = np.zeros((dim, dim), dtype=complex)
            m[i, j] = -1j / math.sqrt(2)
            m[j, i] = 1j / math.sqrt(2)
            ops.append(m)
            names.append(f"asym({i},{j})")
    for k in range(1, dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[:k, :k] = np.eye(k)
        m[k, k] = -k
        ops.append(m / math.sqrt(k * (k + 1)))
        names.append(f"diag({k})")
    return ops, names


def linear_inversion(problem: TomoProblem) -> tuple[np.ndarray, float]:
    """Least-squares Hermitian estimate with unit trace (PSD not enforced).

    Returns ``(H, residual)`` where residual is the sum of squared deviations
    p_i - Tr[M_i H].
    """
    dim = problem.dim
    ops, names = hermitian_basis(dim)
    mats = problem.pset.matrices()
    design = np.array([[np.real(np.trace(m @ t)) for t in ops] for m in mats])
    rank = np.linalg.matrix_rank(design, tol=1e-9)
    if rank < len(ops):
        _, _, vt = np.linalg.svd(design)
        null = vt[rank:]
        worst = [names[int(np.argmax(np.abs(row)))] for row in null]
        raise ValueError(
            "projector set is informationally incomplete; unresolved operator "
            f"directions include {sorted(set(worst))}")
    target = problem.probabilities - np.real(np.trace(mats, axis1=1, axis2=2)) / dim
    if problem.weights is not None:
        sw = np.sqrt(problem.weights)
        x, *_ = np.linalg.lstsq(design * sw[:, None], target * sw, rcond=None)
    else:
        x, *_ = np.linalg.lstsq(design, target, rcond=None)
    h = np.eye(dim, dtype=complex) / dim
    for c, t in zip(x, ops):
        h = h + c * t
    w = problem.weights if problem.weights is not None else 1.0
    resid = float(np.sum(w * (design @ x - target) ** 2))
    return h, resid


def project_psd(h: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Nearest (Frobenius) PSD unit-trace matrix to a Hermitian unit-trace one.

    Works on the eigenvalues: clip negatives to zero and redistribute the
    deficit uniformly over the remaining positive eigenvalues, repeating
    until all are non-negative.
    """
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - h.conj().T)) > 1e-8:
        raise ValueError("input must be Hermitian")
    if abs(np.trace(h).real - 1.0) > 1e-8:
        raise ValueError(f"input trace {np.trace(h).real:.6g} != 1")
    w, v = np.linalg.eigh(h)
    w = w.copy()
    while True:
        neg = w < 0
        if not neg.any():
            break
        deficit = w[neg].sum()
        w[neg] = 0.0
        pos = w > 0
        if not pos.any():
            w[:] = 1.0 / len(w)
            break
        w[pos] += deficit / pos.sum()
    return (v * w) @ v.conj().T


def chi_squared(rho_mat: np.ndarray, problem: TomoProblem,
                mats: np.ndarray | None = None) -> float:
    mats = problem.pset.matrices() if mats is None else mats
    pred = np.real(np.einsum("kij,ji->k", mats, rho_mat))
    w = problem.weights if problem.weights is not None else 1.0
    return float(np.sum(w * (problem.probabilities - pred) ** 2))


def refine(rho_mat: np.ndarray, problem: TomoProblem, max_iter: int = 500,
           min_improvement: float = 1e-10) -> tuple[np.ndarray, float, int]:
    """Projected gradient descent on the squared-residual cost.

    Monotone by construction: a step is only accepted if it lowers the cost.
    Returns (rho, chi2, iterations).
    """
    mats = problem.pset.matrices()
    cost = chi_squared(rho_mat, problem, mats)
    # Lipschitz-style bound on the gradient scale sets the initial step
    step = 1.0 / (2.0 * float(np.sum(np.abs(mats) ** 2)))
    rho = rho_mat
    iters = 0
    dim = rho_mat.shape[0]
    w = problem.weights if problem.weights is not None else \
        np.ones_like(problem.probabilities)
    for iters in range(1, max_iter + 1):
        pred = np.real(np.einsum("kij,ji->k", mats, rho))
        grad = -2.0 * np.einsum("k,kij->ij",
                                w * (problem.probabilities - pred), mats)
        grad = (grad + grad.conj().T) / 2.0
        # stay on the unit-trace hyperplane so the PSD projection applies
        grad -= (np.trace(grad).real / dim) * np.eye(dim)
        improved = False
        trial_step = step
        for _ in range(20):
            cand = project_psd(rho - trial_step * grad)
            cand_cost = chi_squared(cand, problem, mats)
            if cand_cost < cost:
                improved = True
                break
            trial_step /= 2.0
        if not improved:
            break
        gain = cost - cand_cost
        rho, cost = cand, cand_cost
        step = min(trial_step * 2.0, 1.0)
        if gain < min_improvement:
            break
    return rho, cost, iters


@dataclass
class ReconstructionResult:
    rho: DensityMatrix
    chi2: float
    iterations: int
    residual: float
    eigenvalues: np.ndarray

    def report(self) -> dict:
        return {
            "chi2": self.chi2,
            "iterations": self.iterations,
            "linear_inversion_residual": self.residual,
            "eigenvalues": [float(x) for x in self.eigenvalues],
        }


def reconstruct(problem: TomoProblem, refine_iters: int = 500) -> ReconstructionResult:
    """normalize -> linear inversion -> PSD projection -> optional refinement."""
    h, resid = linear_inversion(problem)
    rho_mat = project_psd(h)
    chi0 = chi_squared(rho_mat, problem)
    iters = 0
    if refine_iters > 0:
        rho_mat, chi0, iters = refine(rho_mat, problem, max_iter=refine_iters)
    rho_mat = (rho_mat + rho_mat.conj().T) / 2.0
    rho_mat /= np.trace(rho_mat).real
    rho = DensityMatrix(rho_mat, problem.pset.slots, problem.pset.basis)
    return ReconstructionResult(rho, chi0, iters, resid,
                                np.linalg.eigvalsh(rho_mat))


def reconstruct_from_counts(records: Sequence[CountRecord], pset: ProjectorSet,
                            per_group: bool = False,
                            variance_weighted: bool = False,
                            refine_iters: int = 500) -> ReconstructionResult:
    return reconstruct(normalize_counts(records, pset, per_group,
                                        variance_weighted),
                       refine_iters=refine_iters)


def ingest_counts(path, pset: ProjectorSet | None = None) -> list[CountRecord]:
    """Read and validate a counts CSV; with a set given, also check settings."""
    records = read_counts_csv(path)
    if pset is not None:
        known_a = {p.id.split("*")[0] for p in pset.projectors}
        known_b = {p.id.split("*")[-1] for p in pset.projectors}
        seen = set()
        for i, r in enumerate(records, start=2):
            if r.setting_a not in known_a:
                raise ValueError(f"row {i}: unknown setting_a {r.setting_a!r}")
            if len(pset.slots) > 1 and r.setting_b not in known_b:
                raise ValueError(f"row {i}: unknown setting_b {r.setting_b!r}")
            key = (r.setting_a, r.setting_b)
            if key in seen:
                raise ValueError(f"row {i}: duplicate setting {key}")
            seen.add(key)
    return records


# ---------------------------------------------------------------------------
# Pauli expansion (two-qubit)


@dataclass(frozen=True)
class PauliCoefficients:
    """Expansion rho = sum_{mn} table[m, n] sigma_m (x) sigma_n over m, n in
    0..3, with table[0, 0] = 1/4.  ``b`` is the 3x3 correlation block."""

    table: np.ndarray

    @property
    def b(self) -> np.ndarray:
        return self.table[1:, 1:]

    def to_matrix(self) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        for m, a in enumerate(_PAULI_NAMES):
            for n, bb in enumerate(_PAULI_NAMES):
                out += self.table[m, n] * np.kron(_PAULI[a], _PAULI[bb])
        return out


def pauli_coefficients(rho: DensityMatrix) -> PauliCoefficients:
    """b_mn = Tr[rho (sigma_m x sigma_n)] / 4 for a two-qubit state."""
    if rho.dim != 4:
        raise ValueError(f"Pauli expansion requires a 4-dim state, got {rho.dim}")
    table = np.zeros((4, 4))
    for m, a in enumerate(_PAULI_NAMES):
        for n, bb in enumerate(_PAULI_NAMES):
            op = np.kron(_PAULI[a], _PAULI[bb])
            table[m, n] = float(np.real(np.trace(op @ rho.matrix))) / 4.0
    return PauliCoefficients(table)
