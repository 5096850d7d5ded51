import numpy as np
import pytest

from qskyrm.hilbert import BasisLabel, DensityMatrix, Photon, PureState


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)


def random_pure_state(rng, n_labels=6, photon=Photon.A):
    """Random normalized single-photon OAM/pol state."""
    amps = {}
    for l in range(-(n_labels // 2), n_labels // 2 + 1):
        for pol in ("R", "L"):
            amps[(BasisLabel(photon, oam=l, pol=pol),)] = \
                rng.normal() + 1j * rng.normal()
    return PureState(amps).normalized()


def random_density(rng, dim, slots, basis):
    """Ginibre-ensemble density matrix on the given basis."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = g @ g.conj().T
    m /= np.trace(m).real
    return DensityMatrix(m, slots, basis)


def two_mode_state(a_r, l_r, a_l, l_l, photon=Photon.B):
    """(a_r |l_r, R> + a_l |l_l, L>), normalized."""
    return PureState({
        (BasisLabel(photon, oam=l_r, pol="R"),): a_r,
        (BasisLabel(photon, oam=l_l, pol="L"),): a_l,
    }).normalized()


def _lg_peak_norm(l):
    import math
    return math.sqrt(2.0 ** (abs(l) + 1) / (math.pi * math.factorial(abs(l))))


def equator_radius(a_r, l_r, a_l, l_l):
    """Waist-unit radius where the two mode intensities balance."""
    (a1, l1), (a2, l2) = sorted([(abs(a_r), abs(l_r)), (abs(a_l), abs(l_l))],
                                key=lambda t: t[1])
    return ((a1 * _lg_peak_norm(l1)) / (a2 * _lg_peak_norm(l2))) \
        ** (1.0 / (l2 - l1))


def adaptive_half_extent(a_r, l_r, a_l, l_l):
    """Grid half extent wide enough to capture the texture's far field."""
    return float(min(max(3.0, 4.0 * equator_radius(a_r, l_r, a_l, l_l)), 20.0))
