import numpy as np
import pytest

from qskyrm.device import DeviceParams
from qskyrm.experiment import SourceSpectrum, spdc_state
from qskyrm.ghz import (LogicalMapping, OperatingPointError, ghz_fidelity,
                        ghz_prepare, ghz_project, ghz_target, logical_map,
                        marginal_trace_distance_from_mixed,
                        wavelength_marginal)
from qskyrm.hilbert import (BasisLabel, Photon, PureState, Wavelength,
                            density_from_pure, partial_trace)

SQ2 = 2 ** -0.5


def two_branch_source(l=0):
    """Single-l pair state kept in both spectral branches."""
    return spdc_state(SourceSpectrum.uniform([l], ks=(1, 2)))


class TestPrepare:
    def test_two_branch_transformation(self):
        # the lambda1 component of each photon converts fully, lambda2 passes
        out = ghz_prepare(two_branch_source(0))
        want = PureState({
            (BasisLabel(Photon.A, oam=-2, pol="L", wavelength=Wavelength.LAMBDA1),
             BasisLabel(Photon.B, oam=0, pol="R", wavelength=Wavelength.LAMBDA2)): SQ2,
            (BasisLabel(Photon.A, oam=0, pol="R", wavelength=Wavelength.LAMBDA2),
             BasisLabel(Photon.B, oam=-2, pol="L", wavelength=Wavelength.LAMBDA1)): SQ2,
        })
        assert abs(abs(out.overlap(want)) - 1.0) <= 1e-12

    def test_full_conversion_branch(self):
        from qskyrm.hilbert import ket, tensor
        st = tensor(ket("A", oam=0, pol="R", wavelength=Wavelength.LAMBDA1),
                    ket("B", oam=0, pol="R", wavelength=Wavelength.LAMBDA2))
        out = ghz_prepare(st, force=True)
        (key, amp), = out.amplitudes.items()
        a = next(x for x in key if x.photon is Photon.A)
        assert (a.oam, a.pol) == (-2, "L")
        assert abs(abs(amp) - 1.0) <= 1e-12

    def test_norm_preserved(self):
        out = ghz_prepare(two_branch_source(2))
        assert abs(out.norm() - 1.0) <= 1e-12

    def test_operating_point_guard(self):
        src = two_branch_source(0)
        with pytest.raises(OperatingPointError, match="operating point"):
            ghz_prepare(src, DeviceParams(), 4.7)
        # forcing proceeds with the achieved efficiencies
        out = ghz_prepare(src, DeviceParams(), 4.7, force=True)
        assert abs(out.norm() - 1.0) <= 1e-6


class TestProject:
    def test_herald_probability_and_state(self):
        heralded, p = ghz_project(ghz_prepare(two_branch_source(0)), 0)
        assert abs(p - 0.125) <= 1e-12
        want = PureState({
            (BasisLabel(Photon.A, pol="R"),
             BasisLabel(Photon.B, oam=-2, wavelength=Wavelength.LAMBDA1)): SQ2,
            (BasisLabel(Photon.A, pol="L"),
             BasisLabel(Photon.B, oam=0, wavelength=Wavelength.LAMBDA2)): SQ2,
        })
        assert abs(abs(heralded.overlap(want)) - 1.0) <= 1e-12

    def test_single_branch_gives_product(self):
        src = spdc_state(SourceSpectrum.uniform([0], ks=(1,)))
        heralded, _ = ghz_project(ghz_prepare(src, force=True), 0)
        vec, _ = logical_map(heralded, LogicalMapping.default(0))
        assert abs(ghz_fidelity(vec) - 0.5) <= 1e-12

    def test_output_normalized(self):
        heralded, _ = ghz_project(ghz_prepare(two_branch_source(2)), 2)
        assert abs(heralded.norm() - 1.0) <= 1e-12

    def test_multi_l_spectrum_warns(self):
        src = spdc_state(SourceSpectrum.uniform([0, 2], ks=(1, 2)))
        prepared = ghz_prepare(src)
        with pytest.warns(UserWarning, match="outside"):
            ghz_project(prepared, 0)


class TestLogicalMap:
    def test_ghz_form(self):
        heralded, _ = ghz_project(ghz_prepare(two_branch_source(0)), 0)
        vec, slots = logical_map(heralded, LogicalMapping.default(0))
        assert slots == ["A.pol", "B.wavelength", "B.oam"]
        assert abs(ghz_fidelity(vec) - 1.0) <= 1e-10

    def test_pre_projection_six_qubit_form(self):
        # B's OAM keys follow the same l -> bit rule as photon A here
        mapping = LogicalMapping(
            pol={"R": 0, "L": 1},
            wavelength={Wavelength.LAMBDA1: 0, Wavelength.LAMBDA2: 1},
            oam_a={0: 0, -2: 1}, oam_b={0: 0, -2: 1})
        vec, slots = logical_map(ghz_prepare(two_branch_source(0)), mapping)
        assert slots == ["A.wavelength", "A.pol", "A.oam",
                         "B.wavelength", "B.pol", "B.oam"]
        nz = {format(i, "06b") for i in np.flatnonzero(np.abs(vec) > 1e-12)}
        assert nz == {"011100", "100011"}

    def test_unmapped_label_errors(self):
        heralded, _ = ghz_project(ghz_prepare(two_branch_source(0)), 0)
        bad = LogicalMapping(pol={"R": 0, "L": 1},
                             wavelength={Wavelength.LAMBDA1: 0,
                                         Wavelength.LAMBDA2: 1},
                             oam_a={0: 0, -2: 1}, oam_b={5: 0, 6: 1})
        with pytest.raises(ValueError, match="no logical assignment"):
            logical_map(heralded, bad)

    def test_mapping_must_be_bijective(self):
        with pytest.raises(ValueError):
            LogicalMapping(pol={"R": 0, "L": 0},
                           wavelength={Wavelength.LAMBDA1: 0,
                                       Wavelength.LAMBDA2: 1},
                           oam_a={0: 0, -2: 1}, oam_b={0: 1, -2: 0})


class TestFidelity:
    def test_single_component_overlap(self):
        assert abs(ghz_fidelity(np.eye(8)[0]) - 0.5) <= 1e-12

    def test_maximally_mixed(self):
        assert abs(ghz_fidelity(np.eye(8) / 8) - 0.125) <= 1e-12

    def test_target_is_fixed_point(self):
        assert abs(ghz_fidelity(ghz_target()) - 1.0) <= 1e-14


class TestNonseparability:
    def test_wavelength_marginal_maximally_mixed(self):
        marg = wavelength_marginal(ghz_prepare(two_branch_source(0)))
        assert marginal_trace_distance_from_mixed(marg) <= 1e-10

    def test_resolved_state_has_pure_marginal(self):
        # after the dichroic fixes the branches, wavelength factors out
        src = two_branch_source(0)
        branch, _ = src.project_dof(Photon.A, "wavelength", Wavelength.LAMBDA1)
        marg = wavelength_marginal(branch)
        purity = float(np.real(np.trace(marg.matrix @ marg.matrix)))
        assert abs(purity - 1.0) <= 1e-10

    def test_pairwise_marginals_of_ghz_are_mixed(self):
        heralded, _ = ghz_project(ghz_prepare(two_branch_source(0)), 0)
        rho = density_from_pure(heralded)
        for slot in ("A.pol", "B.wavelength", "B.oam"):
            marg = partial_trace(rho, [slot])
            assert marginal_trace_distance_from_mixed(marg) <= 1e-10
