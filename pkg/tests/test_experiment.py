import math

import numpy as np
import pytest

from qskyrm.device import apply_qplate
from qskyrm.experiment import (CHSH_SETTINGS, CountRecord, SourceSpectrum,
                               bell_state_oam, chsh, chsh_from_counts,
                               chsh_probabilities, chsh_scan,
                               coincidence_probability, derive_seed, herald,
                               oam_theta_projector, read_counts_csv,
                               resolve_wavelength, simulate_chsh_counts,
                               simulate_counts, smf_project, spdc_state,
                               theta_id, werner_state, write_counts_csv)
from qskyrm.hilbert import (BasisLabel, CompositionError, NullOutcome, Photon,
                            PureState, Wavelength, density_from_pure,
                            partial_trace)

SQ2 = 2 ** -0.5


def partial_conversion_state(eta=0.5, convention="real"):
    """Balanced-source pipeline through the plate and the fiber projection."""
    state = spdc_state(SourceSpectrum.uniform([0, 2, -2]))
    etas = {Wavelength.LAMBDA1: eta, Wavelength.LAMBDA2: eta}
    for photon in (Photon.A, Photon.B):
        state = apply_qplate(state, photon, etas, convention)
    state, _ = resolve_wavelength(state)
    return smf_project(state, Photon.A)


def hybrid(entries):
    """entries: list of ((label kwargs per photon), amplitude)."""
    amps = {}
    for key, amp in entries:
        amps[tuple(BasisLabel(Photon(p), **dict(kw)) for p, kw in key)] = amp
    return PureState(amps)


class TestSource:
    def test_uniform_restricted_spectrum(self):
        st = spdc_state(SourceSpectrum.uniform([2, -2]))
        assert len(st.amplitudes) == 4
        assert all(abs(a - 0.5) < 1e-12 for a in st.amplitudes.values())

    def test_single_term_product(self):
        st = spdc_state(SourceSpectrum.single(0, 1))
        (key, amp), = st.amplitudes.items()
        a, b = key
        assert (a.oam, a.pol, a.wavelength) == (0, "R", Wavelength.LAMBDA1)
        assert (b.oam, b.pol, b.wavelength) == (0, "R", Wavelength.LAMBDA2)

    def test_oam_anticorrelation(self):
        st = spdc_state(SourceSpectrum.uniform([0, 2, -2]))
        for key in st.amplitudes:
            a = next(l for l in key if l.photon is Photon.A)
            b = next(l for l in key if l.photon is Photon.B)
            assert a.oam == -b.oam

    def test_unnormalized_spectrum_rejected(self):
        with pytest.raises(ValueError):
            SourceSpectrum({(0, 1): 0.9})


class TestResolveWavelength:
    def test_uniform_branch_probability(self):
        st = spdc_state(SourceSpectrum.uniform([2, -2]))
        _, p = resolve_wavelength(st)
        assert abs(p - 0.5) < 1e-12

    def test_single_branch_identity(self):
        st = spdc_state(SourceSpectrum.uniform([2, -2], ks=(1,)))
        out, p = resolve_wavelength(st)
        assert abs(p - 1.0) < 1e-12

    def test_oam_joint_distribution_preserved(self):
        # oracle: compare the joint |amplitude|^2 tables before and after
        st = spdc_state(SourceSpectrum.uniform([0, 2, -2]))

        def joint(state):
            table = {}
            for key, a in state.amplitudes.items():
                la = next(l.oam for l in key if l.photon is Photon.A)
                lb = next(l.oam for l in key if l.photon is Photon.B)
                table[(la, lb)] = table.get((la, lb), 0.0) + abs(a) ** 2
            total = sum(table.values())
            return {k: v / total for k, v in table.items()}

    # branch projection must not touch the spatial correlations
        before, after = joint(st), joint(resolve_wavelength(st)[0])
        assert set(before) == set(after)
        assert all(abs(before[k] - after[k]) <= 1e-12 for k in before)

    def test_empty_branch_is_null(self):
        st = spdc_state(SourceSpectrum.uniform([0], ks=(2,)))
        with pytest.raises(NullOutcome):
            resolve_wavelength(st, {Photon.A: Wavelength.LAMBDA1,
                                    Photon.B: Wavelength.LAMBDA2})


class TestPipelineIdentity:
    def test_partial_conversion_state_amplitudes(self):
        # eta = 1/2 on both photons, photon A on the fiber: the four-term
        # conditional state has equal 1/2 amplitudes up to a global phase
        state, _ = partial_conversion_state()
        target = hybrid([
            ((("A", (("pol", "R"),)), ("B", (("oam", 0), ("pol", "R")))), 0.5),
            ((("A", (("pol", "R"),)), ("B", (("oam", -2), ("pol", "L")))), 0.5),
            ((("A", (("pol", "L"),)), ("B", (("oam", -2), ("pol", "R")))), 0.5),
            ((("A", (("pol", "L"),)), ("B", (("oam", -4), ("pol", "L")))), 0.5),
        ])
        assert abs(abs(state.overlap(target)) - 1.0) <= 1e-12

    def test_smf_null_without_support(self):
        st = spdc_state(SourceSpectrum.uniform([2], ks=(1,)))
        st, _ = resolve_wavelength(st)
        with pytest.raises(NullOutcome):
            smf_project(st, Photon.A)

    def test_smf_unity_on_fundamental(self):
        st = spdc_state(SourceSpectrum.uniform([0], ks=(1,)))
        st, _ = resolve_wavelength(st)
        _, p = smf_project(st, Photon.A)
        assert abs(p - 1.0) < 1e-12


class TestHerald:
    def test_nonlocal_state_from_partner_polarization(self):
        state, _ = partial_conversion_state()
        out, p = herald(state, Photon.B, "R")
        target = hybrid([
            ((("A", (("pol", "R"),)), ("B", (("oam", 0),))), SQ2),
            ((("A", (("pol", "L"),)), ("B", (("oam", -2),))), SQ2),
        ])
        assert abs(p - 0.5) < 1e-12
        assert abs(abs(out.overlap(target)) - 1.0) <= 1e-12

    def test_local_state_from_own_polarization(self):
        state, _ = partial_conversion_state()
        out, p = herald(state, Photon.A, "L")
        target = PureState({
            (BasisLabel(Photon.B, oam=-2, pol="R"),): SQ2,
            (BasisLabel(Photon.B, oam=-4, pol="L"),): SQ2,
        })
        assert abs(p - 0.5) < 1e-12
        assert abs(abs(out.overlap(target)) - 1.0) <= 1e-12

    def test_absent_polarization_is_null(self):
        state = PureState({(BasisLabel(Photon.A, oam=0, pol="R"),
                            BasisLabel(Photon.B, oam=0, pol="R")): 1.0})
        with pytest.raises(NullOutcome):
            herald(state, Photon.B, "L")

    def test_heralding_consistency(self):
        # both herald outcomes, weighted, rebuild the polarization-traced state
        state, _ = partial_conversion_state()
        traced = partial_trace(density_from_pure(state), ["A.pol", "B.oam"])
        pos = {b: i for i, b in enumerate(traced.basis)}
        mix = np.zeros_like(traced.matrix)
        for outcome in ("R", "L"):
            sub, p = herald(state, Photon.B, outcome)
            rho = density_from_pure(sub)
            idx = [pos[b] for b in rho.basis]  # embed in the union basis
            mix[np.ix_(idx, idx)] += p * rho.matrix
        assert np.max(np.abs(mix - traced.matrix)) <= 1e-10


class TestCoincidence:
    def test_bell_correlation_law(self):
        # closed-form oracle: C = cos^2(theta_a - theta_b)/2
        bell = bell_state_oam()
        for ta in (0.0, 0.3, 1.1):
            for tb in (0.0, 0.45, 2.0):
                pa = oam_theta_projector(Photon.A, ta)
                pb = oam_theta_projector(Photon.B, tb)
                got = coincidence_probability(bell, pa, pb)
                want = math.cos(ta - tb) ** 2 / 2.0
                assert abs(got - want) <= 1e-12

    def test_equal_settings_maximum(self):
        bell = bell_state_oam()
        p_eq = coincidence_probability(bell, oam_theta_projector(Photon.A, 0.7),
                                       oam_theta_projector(Photon.B, 0.7))
        for tb in np.linspace(0, math.pi, 13):
            p = coincidence_probability(bell, oam_theta_projector(Photon.A, 0.7),
                                        oam_theta_projector(Photon.B, tb))
            assert p <= p_eq + 1e-12

    def test_orthogonal_projectors_on_product_state(self):
        st = PureState({(BasisLabel(Photon.A, oam=2),
                         BasisLabel(Photon.B, oam=-2)): 1.0})
        pa = oam_theta_projector(Photon.A, 0.0)
        pb = oam_theta_projector(Photon.B, 0.0, perp=True)
        pa2 = oam_theta_projector(Photon.A, 0.0, perp=True)
        p = coincidence_probability(st, pa, pb)
        p2 = coincidence_probability(st, pa2, pb)
        assert abs(p - 0.25) < 1e-12  # product state factorizes
        # and a genuinely orthogonal single-photon pair annihilates
        from qskyrm.hilbert import ProjectorOp
        k2 = ProjectorOp.from_ket("p2", ("A.oam",), [(2,), (-2,)], [1, 0])
        m2 = ProjectorOp.from_ket("m2", ("A.oam",), [(2,), (-2,)], [0, 1])
        st_a = PureState({(BasisLabel(Photon.A, oam=2),
                           BasisLabel(Photon.B, oam=-2)): 1.0})
        assert coincidence_probability(
            st_a, m2, ProjectorOp.from_ket("x", ("B.oam",), [(-2,),], [1])) == 0

    def test_completeness_over_joint_basis(self):
        bell = werner_state(visibility=0.7)
        total = 0.0
        from qskyrm.hilbert import ProjectorOp
        for ia, va in (("p2", [1, 0]), ("m2", [0, 1])):
            for ib, vb in (("p2", [1, 0]), ("m2", [0, 1])):
                pa = ProjectorOp.from_ket(ia, ("A.oam",), [(2,), (-2,)], va)
                pb = ProjectorOp.from_ket(ib, ("B.oam",), [(-2,), (2,)], vb)
                total += coincidence_probability(bell, pa, pb)
        assert abs(total - 1.0) <= 1e-10

    def test_overlapping_subsystems_rejected(self):
        bell = bell_state_oam()
        pa = oam_theta_projector(Photon.A, 0.0)
        pa2 = oam_theta_projector(Photon.A, 0.3)
        with pytest.raises(CompositionError):
            coincidence_probability(bell, pa, pa2)


class TestCounts:
    def test_zero_probability_zero_counts(self):
        for seed in range(20):
            assert simulate_counts(0.0, 2000.0, 1.0, seed=seed).counts == 0

    def test_poisson_mean_oracle(self):
        # sample mean over 1e4 draws within 3 sigma / sqrt(n) of p*rate*t
        n, mean = 10_000, 2000.0
        draws = np.array([simulate_counts(1.0, 2000.0, 1.0, seed=i).counts
                          for i in range(n)], dtype=float)
        tol = 3.0 * math.sqrt(mean) / math.sqrt(n)
        assert abs(draws.mean() - mean) <= tol

    def test_poisson_variance_over_mean(self):
        draws = np.array([simulate_counts(0.25, 2000.0, 1.0, seed=i).counts
                          for i in range(10_000)], dtype=float)
        assert abs(draws.var() / draws.mean() - 1.0) <= 0.05

    def test_deterministic_under_seed(self):
        a = simulate_counts(0.4, 2000.0, 2.0, seed=99)
        b = simulate_counts(0.4, 2000.0, 2.0, seed=99)
        assert a == b

    def test_accidental_rate_adds_background(self):
        draws = np.array([simulate_counts(0.0, 2000.0, 1.0, 50.0, seed=i).counts
                          for i in range(4000)], dtype=float)
        assert abs(draws.mean() - 50.0) <= 3.0 * math.sqrt(50.0 / 4000) + 0.5

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            simulate_counts(1.5, 2000.0, 1.0)
        with pytest.raises(ValueError):
            simulate_counts(0.5, -1.0, 1.0)
        with pytest.raises(ValueError):
            CountRecord("a", "b", -1, 1.0)

    def test_csv_round_trip(self, tmp_path):
        recs = [simulate_counts(0.3, 2000.0, 1.0, seed=derive_seed(0, i),
                                setting_a=f"a{i}", setting_b="b")
                for i in range(5)]
        path = tmp_path / "counts.csv"
        write_counts_csv(recs, path)
        assert read_counts_csv(path) == recs


class TestChsh:
    def test_tsirelson_value_for_bell_state(self):
        assert abs(chsh(bell_state_oam()) - 2.0 * math.sqrt(2.0)) <= 1e-6

    def test_werner_visibility_oracle(self):
        # S scales linearly with visibility: S = 2 sqrt(2) v
        for v in (0.86, 0.5, 0.95):
            got = chsh(werner_state(visibility=v))
            assert abs(got - 2.0 * math.sqrt(2.0) * v) <= 1e-9

    def test_separable_state_within_classical_bound(self):
        st = PureState({(BasisLabel(Photon.A, oam=2),
                         BasisLabel(Photon.B, oam=-2)): 1.0})
        assert abs(chsh(st)) <= 2.0 + 1e-12

    def test_correlation_visibility_and_period(self):
        bell = bell_state_oam()
        pa = oam_theta_projector(Photon.A, 0.0)
        scan = [coincidence_probability(bell, pa,
                                        oam_theta_projector(Photon.B, tb))
                for tb in np.linspace(0, math.pi, 181)]
        c_max, c_min = max(scan), min(scan)
        assert abs((c_max - c_min) / (c_max + c_min) - 1.0) <= 1e-9
        # the coincidence law is pi-periodic in the analyzer phase angle
        for ta, tb in [(0.2, 0.5), (0.0, 1.0)]:
            pa = oam_theta_projector(Photon.A, ta)
            pb = oam_theta_projector(Photon.B, tb)
            pb_shift = oam_theta_projector(Photon.B, tb + math.pi)
            assert abs(coincidence_probability(bell, pa, pb)
                       - coincidence_probability(bell, pa, pb_shift)) <= 1e-12

    def test_missing_settings_error(self):
        probs = chsh_probabilities(bell_state_oam())
        probs.pop((theta_id(0.0), theta_id(CHSH_SETTINGS[2])))
        with pytest.raises(ValueError):
            from qskyrm.experiment import chsh_from_values
            chsh_from_values(probs)

    def test_counts_estimate_converges(self):
        recs = simulate_chsh_counts(werner_state(visibility=0.86),
                                    rate_max=2000.0, integration_s=125.0,
                                    seed=17)
        s = chsh_from_counts(recs)
        assert abs(s - 2.432) <= 0.05

    def test_scan_peaks_at_tsirelson(self):
        # 64 intervals put the optimal pi/8 analyzer angle on the scan grid
        scan = chsh_scan(bell_state_oam(), np.linspace(0, math.pi, 65))
        assert abs(np.max(np.abs(scan)) - 2.0 * math.sqrt(2.0)) <= 1e-9
