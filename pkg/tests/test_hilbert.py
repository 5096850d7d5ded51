import math

import numpy as np
import pytest

from conftest import random_density, random_pure_state
from qskyrm.config import check_energy_conservation
from qskyrm.hilbert import (POL_KETS, BasisLabel, CompositionError,
                            DensityMatrix, NullOutcome, Photon, ProjectorOp,
                            PureState, Wavelength, density_from_pure,
                            fidelity, ket, partial_trace, pol_matrix, project,
                            tensor)

SQ2 = 2 ** -0.5


def test_energy_conservation_of_default_channels():
    check_energy_conservation()
    with pytest.raises(ValueError):
        check_energy_conservation(1550.0, 900.0)


class TestTensor:
    def test_product_of_unit_kets(self):
        a = ket("A", oam=0, pol="R", wavelength=Wavelength.LAMBDA1)
        b = ket("B", oam=0, pol="R", wavelength=Wavelength.LAMBDA2)
        t = tensor(a, b)
        assert abs(t.norm() - 1.0) < 1e-12
        assert len(t.amplitudes) == 1

    def test_linearity(self):
        plus = PureState({(BasisLabel(Photon.A, oam=0),): SQ2,
                          (BasisLabel(Photon.A, oam=2),): SQ2})
        t = tensor(plus, ket("B", oam=-2))
        assert len(t.amplitudes) == 2
        assert all(abs(a - SQ2) < 1e-12 for a in t.amplitudes.values())

    def test_shared_photon_rejected(self):
        with pytest.raises(CompositionError):
            tensor(ket("A", oam=0), ket("A", oam=1))


class TestProject:
    def test_eigenstate(self):
        s = ket("A", oam=0, pol="R")
        out, p = s.project_dof("A", "pol", "R")
        assert abs(p - 1.0) < 1e-12
        assert abs(abs(out.overlap(s)) - 1.0) < 1e-12

    def test_balanced_superposition(self):
        s = PureState({(BasisLabel(Photon.A, oam=0, pol="R"),): SQ2,
                       (BasisLabel(Photon.A, oam=-2, pol="L"),): SQ2})
        out, p = s.project_dof("A", "pol", "L")
        assert abs(p - 0.5) < 1e-12
        assert abs(abs(out.overlap(ket("A", oam=-2, pol="L"))) - 1.0) < 1e-12

    def test_orthogonal_is_null_outcome(self):
        with pytest.raises(NullOutcome):
            ket("A", oam=0, pol="R").project_dof("A", "pol", "L")

    def test_projector_op_subspace(self):
        bell = PureState({
            (BasisLabel(Photon.A, oam=2), BasisLabel(Photon.B, oam=-2)): SQ2,
            (BasisLabel(Photon.A, oam=-2), BasisLabel(Photon.B, oam=2)): SQ2})
        pr = ProjectorOp.from_ket("m2", ("A.oam",), [(2,), (-2,)], [0.0, 1.0])
        out, p = project(bell, pr)
        assert abs(p - 0.5) < 1e-12
        assert (BasisLabel(Photon.A, oam=-2), BasisLabel(Photon.B, oam=2)) \
            in out.amplitudes

    def test_norm_preserved_after_projection(self, rng):
        # renormalized projections never drift off unit norm
        for _ in range(50):
            s = random_pure_state(rng)
            theta = rng.uniform(0, 2 * math.pi)
            target = {"R": math.cos(theta), "L": math.sin(theta)}
            try:
                out, _ = s.project_dof("A", "pol", target)
            except NullOutcome:
                continue
            assert abs(out.norm() - 1.0) <= 1e-12


class TestDensityFromPure:
    def test_basis_ket(self):
        rho = density_from_pure(ket("A", oam=0, pol="R"))
        assert rho.dim == 1
        assert abs(rho.matrix[0, 0] - 1.0) < 1e-14

    def test_bell_outer_product(self):
        bell = PureState({
            (BasisLabel(Photon.A, oam=2), BasisLabel(Photon.B, oam=-2)): SQ2,
            (BasisLabel(Photon.A, oam=-2), BasisLabel(Photon.B, oam=2)): SQ2})
        rho = density_from_pure(bell)
        assert rho.dim == 4
        assert np.sum(np.abs(rho.matrix) > 1e-14) == 4
        assert np.allclose(rho.matrix[np.abs(rho.matrix) > 1e-14], 0.5)

    def test_unnormalized_rejected(self):
        s = ket("A", oam=0).scaled(0.7)
        with pytest.raises(ValueError):
            density_from_pure(s)

    def test_invariants_hold_for_random_states(self, rng):
        # spec property: 1000 random normalized states all validate
        for _ in range(1000):
            n = rng.integers(1, 5)
            amps = {(BasisLabel(Photon.A, oam=int(l), pol=p),):
                    rng.normal() + 1j * rng.normal()
                    for l in rng.choice(range(-4, 5), size=n, replace=False)
                    for p in ("R", "L")}
            rho = density_from_pure(PureState(amps).normalized())
            m = rho.matrix
            assert np.max(np.abs(m - m.conj().T)) <= 1e-10
            assert np.linalg.eigvalsh(m).min() >= -1e-9
            assert abs(np.trace(m).real - 1.0) <= 1e-10


class TestPartialTrace:
    def test_product_state(self):
        a = ket("A", oam=1, pol="R")
        b = PureState({(BasisLabel(Photon.B, oam=0, pol="R"),): 0.6,
                       (BasisLabel(Photon.B, oam=2, pol="L"),): 0.8})
        rho = density_from_pure(tensor(a, b))
        red = partial_trace(rho, ["B.pol", "B.oam"])
        want = density_from_pure(b)
        assert red.basis == want.basis
        assert np.max(np.abs(red.matrix - want.matrix)) < 1e-12

    def test_maximally_entangled_spin_orbit(self):
        s = PureState({(BasisLabel(Photon.B, oam=0, pol="R"),): SQ2,
                       (BasisLabel(Photon.B, oam=-2, pol="L"),): SQ2})
        red = partial_trace(density_from_pure(s), ["B.pol"])
        assert np.max(np.abs(red.matrix - np.eye(2) / 2)) < 1e-12

    def test_full_trace_is_scalar_one(self):
        rho = density_from_pure(ket("A", oam=0, pol="R"))
        out = partial_trace(rho, [])
        assert out.dim == 1
        assert abs(out.matrix[0, 0] - 1.0) < 1e-12

    def test_bad_selector(self):
        rho = density_from_pure(ket("A", oam=0))
        with pytest.raises(CompositionError):
            partial_trace(rho, ["B.oam"])

    def test_marginals_match_analytic_on_product_states(self, rng):
        # spec property: 200 random product states, marginal fidelity 1
        for _ in range(200):
            a = random_pure_state(rng, n_labels=2, photon=Photon.A)
            b = random_pure_state(rng, n_labels=2, photon=Photon.B)
            rho = density_from_pure(tensor(a, b))
            red = partial_trace(rho, ["A.pol", "A.oam"])
            want = density_from_pure(a).reordered(red.basis)
            assert abs(fidelity(red, want) - 1.0) <= 1e-9


class TestFidelity:
    def _pair(self, rng):
        slots = ("A.oam",)
        basis = ((-2,), (-1,), (1,), (2,))
        return (random_density(rng, 4, slots, basis),
                random_density(rng, 4, slots, basis))

    def test_self_fidelity(self, rng):
        rho, _ = self._pair(rng)
        assert abs(fidelity(rho, rho) - 1.0) < 1e-9

    def test_orthogonal_pure_states(self):
        b = (("R",), ("L",))
        m1 = DensityMatrix(np.diag([1.0, 0.0]), ("A.pol",), b)
        m2 = DensityMatrix(np.diag([0.0, 1.0]), ("A.pol",), b)
        assert fidelity(m1, m2) < 1e-12

    def test_mixed_vs_bell(self):
        bell = PureState({
            (BasisLabel(Photon.A, oam=2), BasisLabel(Photon.B, oam=-2)): SQ2,
            (BasisLabel(Photon.A, oam=-2), BasisLabel(Photon.B, oam=2)): SQ2})
        rho = density_from_pure(bell)
        i4 = DensityMatrix(np.eye(4) / 4, rho.slots, rho.basis)
        # closed form: Tr[sqrt(P/4)]^2 = 1/4 for rank-one P
        assert abs(fidelity(i4, rho) - 0.25) < 1e-9

    def test_eigen_oracle_agreement(self, rng):
        # independent route: scipy matrix square roots
        sqrtm = pytest.importorskip("scipy.linalg").sqrtm
        for _ in range(20):
            rho, sigma = self._pair(rng)
            inner = sqrtm(sqrtm(sigma.matrix) @ rho.matrix @ sqrtm(sigma.matrix))
            want = float(np.real(np.trace(inner)) ** 2)
            assert abs(fidelity(rho, sigma) - want) < 1e-9

    def test_symmetry(self, rng):
        rho, sigma = self._pair(rng)
        assert abs(fidelity(rho, sigma) - fidelity(sigma, rho)) < 1e-9

    def test_dimension_mismatch(self, rng):
        rho = random_density(rng, 2, ("A.pol",), (("R",), ("L",)))
        sig = random_density(rng, 4, ("A.oam",), ((-2,), (-1,), (1,), (2,)))
        with pytest.raises(CompositionError):
            fidelity(rho, sig)


class TestPolarizationBases:
    def test_orthonormality(self):
        for a, b in [("H", "V"), ("D", "A"), ("R", "L")]:
            assert abs(np.vdot(POL_KETS[a], POL_KETS[a]) - 1.0) < 1e-12
            assert abs(np.vdot(POL_KETS[a], POL_KETS[b])) < 1e-12

    def test_fixed_phase_convention(self):
        assert np.allclose(POL_KETS["H"], (POL_KETS["R"] + POL_KETS["L"]) * SQ2)
        assert np.allclose(POL_KETS["V"],
                           (POL_KETS["R"] - POL_KETS["L"]) / (1j * math.sqrt(2)))
        assert np.allclose(POL_KETS["D"], (POL_KETS["H"] + POL_KETS["V"]) * SQ2)
        assert np.allclose(POL_KETS["A"], (POL_KETS["H"] - POL_KETS["V"]) * SQ2)

    def test_round_trip_through_linear_bases(self, rng):
        # R/L -> H/V -> D/A -> R/L returns the input amplitudes
        m_hv, m_da = pol_matrix(["H", "V"]), pol_matrix(["D", "A"])
        for _ in range(25):
            v = rng.normal(size=2) + 1j * rng.normal(size=2)
            v /= np.linalg.norm(v)
            in_hv = m_hv.conj().T @ v
            in_da = m_da.conj().T @ (m_hv @ in_hv)
            back = m_da @ in_da
            assert np.max(np.abs(back - v)) <= 1e-12


class TestSerialization:
    def test_json_round_trip(self, rng):
        rho = random_density(rng, 4, ("pol", "oam"),
                             (("R", -2), ("R", -4), ("L", -2), ("L", -4)))
        back = DensityMatrix.from_json(rho.to_json())
        assert back.basis == rho.basis
        assert back.slots == rho.slots
        assert np.max(np.abs(back.matrix - rho.matrix)) == 0.0

    def test_wavelength_labels_survive(self):
        s = tensor(ket("A", pol="R", wavelength=Wavelength.LAMBDA1),
                   ket("B", pol="R", wavelength=Wavelength.LAMBDA2))
        rho = density_from_pure(s)
        back = DensityMatrix.from_json(rho.to_json())
        assert back.basis == rho.basis

    def test_validation_rejects_bad_matrices(self):
        b = (("R",), ("L",))
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[0.5, 0.5], [0.4, 0.5]]), ("pol",), b)
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([0.8, 0.8]), ("pol",), b)
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.5, -0.5]), ("pol",), b)
