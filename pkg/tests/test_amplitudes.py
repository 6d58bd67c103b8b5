import math

import numpy as np
import pytest

from vortexslit import kinematics as kin
from vortexslit.amplitudes import (
    ALL_HELICITIES,
    ALPHA_EM,
    CONSERVING_HELICITIES,
    GAMMA,
    HelicitySet,
    apply_phase,
    coulomb_phase,
    current,
    dirac_spinor,
    moller_exact,
    moller_unpolarized,
    moller_ur,
)
from vortexslit.checks import random_scattering
from vortexslit.errors import DomainError, SingularityError
from vortexslit.kinematics import M_E, FourMomentum, TransverseVector

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


def slash(p):
    return sum(METRIC[m, m] * p[m] * GAMMA[m] for m in range(4))


def test_clifford_algebra():
    for a in range(4):
        for b in range(4):
            anti = GAMMA[a] @ GAMMA[b] + GAMMA[b] @ GAMMA[a]
            assert np.allclose(anti, 2 * METRIC[a, b] * np.eye(4))


@pytest.mark.parametrize("h", [1, -1])
def test_spinor_solves_dirac_equation(h):
    rng = np.random.default_rng(1)
    for _ in range(20):
        px, py, pz = rng.normal(scale=800.0, size=3)
        E = math.sqrt(M_E**2 + px * px + py * py + pz * pz)
        u = dirac_spinor(E, px, py, pz, h)
        assert np.allclose((slash([E, px, py, pz]) - M_E * np.eye(4)) @ u, 0, atol=1e-9 * E)
        ubar = np.conj(u) @ GAMMA[0]
        assert (ubar @ u).real == pytest.approx(2 * M_E, rel=1e-10)
        # helicity eigenstate
        p3 = np.array([px, py, pz]) / math.sqrt(px * px + py * py + pz * pz)
        sigma = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
        hel2 = np.einsum("i,iab->ab", p3, sigma)
        hel = np.block([[hel2, np.zeros((2, 2))], [np.zeros((2, 2)), hel2]])
        assert np.allclose(hel @ u, h * u, atol=1e-10 * np.abs(u).max())


def test_spinor_rejects_bad_helicity():
    with pytest.raises(DomainError):
        dirac_spinor(1000.0, 1.0, 0.0, 800.0, 0)
    with pytest.raises(DomainError):
        HelicitySet(1, 2, 1, 1).validate()


def test_spinor_completeness():
    E, p = 1500.0, (300.0, -200.0, 1300.0)
    E = math.sqrt(M_E**2 + sum(x * x for x in p))
    s = sum(np.outer(dirac_spinor(E, *p, h), np.conj(dirac_spinor(E, *p, h)) @ GAMMA[0]) for h in (1, -1))
    assert np.allclose(s, slash([E, *p]) + M_E * np.eye(4), atol=1e-9 * E)


def test_current_conservation():
    rng = np.random.default_rng(2)
    for _ in range(10):
        a = FourMomentum.on_shell(TransverseVector(*rng.normal(scale=300, size=2)), 1500.0)
        b = FourMomentum.on_shell(TransverseVector(*rng.normal(scale=300, size=2)), 1400.0)
        q = np.array([a.E - b.E, a.px - b.px, a.py - b.py, a.pz - b.pz])
        J = current(dirac_spinor(b.E, b.px, b.py, b.pz, 1), dirac_spinor(a.E, a.px, a.py, a.pz, -1))
        assert abs(q[0] * J[0] - q[1:] @ J[1:]) < 1e-9 * a.E**2


def test_unpolarized_matches_trace(beams):
    rng = np.random.default_rng(3)
    for _ in range(50):
        q1, q2, p1, p2 = random_scattering(beams, rng)
        tot = sum(abs(moller_exact(q1, q2, p1, p2, h)) ** 2 for h in ALL_HELICITIES) / 4
        s, t, u = kin.mandelstam(q1, q2, p1, p2)
        assert tot == pytest.approx(moller_unpolarized(s, t, u), rel=1e-10)


def test_exchange_antisymmetry(beams):
    rng = np.random.default_rng(4)
    q1, q2, p1, p2 = random_scattering(beams, rng)
    for h in ALL_HELICITIES:
        swapped = HelicitySet(h.lam1, h.lam2, h.lam2p, h.lam1p)
        a = moller_exact(q1, q2, p1, p2, h)
        b = moller_exact(q1, q2, p2, p1, swapped)
        assert a == pytest.approx(-b, rel=1e-10, abs=1e-12 * abs(a) + 1e-300)


def test_parity_flip_preserves_modulus(beams):
    rng = np.random.default_rng(5)
    q1, q2, p1, p2 = random_scattering(beams, rng)
    for h in ALL_HELICITIES:
        a = abs(moller_exact(q1, q2, p1, p2, h))
        b = abs(moller_exact(q1, q2, p1, p2, h.flipped()))
        assert a == pytest.approx(b, rel=1e-9)


def test_exact_rejects_bad_kinematics(beams):
    rng = np.random.default_rng(6)
    q1, q2, p1, p2 = random_scattering(beams, rng)
    off = FourMomentum(p1.E * 1.01, p1.px, p1.py, p1.pz)
    with pytest.raises(DomainError):
        moller_exact(q1, q2, off, p2, (1, 1, 1, 1))
    with pytest.raises(SingularityError):
        moller_exact(q1, q2, q1, q2, (1, 1, 1, 1), check=False)


def test_ur_amplitude_selection_rules():
    s, t = 1.8e7, -4.0e4
    for h in ALL_HELICITIES:
        m = moller_ur(s, t, 0.1, 0.2, 0.3, 0.4, h)
        if h.conserving():
            assert abs(m) == pytest.approx(8 * math.pi * ALPHA_EM * s / abs(t))
        else:
            assert m == 0
    with pytest.raises(SingularityError):
        moller_ur(s, -1e-7, 0, 0, 0, 0, (1, 1, 1, 1))


def test_mass_term_limits_small_angle_ratio():
    """At fixed energy, shrinking angles drives exact/UR to (s - 2m^2)/s, not to 1."""
    b1 = kin.BesselBeam.from_energy(2100.0, 2.0, 1)
    b2 = kin.BesselBeam.from_kz(-b1.kz, 1.0, 13)
    k1, k2 = TransverseVector(2.0, 0.0), TransverseVector(0.0, 1.0)
    k1p = TransverseVector(1.5, 1.0)
    _, (p1, p2) = kin.solve_final_longitudinal((b1, b2), k1p, k1 + k2 - k1p)
    q1, q2 = FourMomentum.on_shell(k1, b1.kz), FourMomentum.on_shell(k2, b2.kz)
    s, t = (q1 + q2).mass2(), (q1 - p1).mass2()
    phis = (0.0, math.pi / 2, k1p.azimuth(), (k1 + k2 - k1p).azimuth())
    for h in CONSERVING_HELICITIES:
        r = moller_exact(q1, q2, p1, p2, h, phis=phis) / moller_ur(s, t, phis[0], phis[2], phis[1], phis[3], h)
        assert r == pytest.approx((s - 2 * M_E**2) / s, rel=1e-5)


def test_coulomb_phase():
    assert coulomb_phase(-1.0, 0.5) == 0.0
    ta, tb = -4.0e4, -9.0e4
    za, zb = coulomb_phase(ta, ALPHA_EM), coulomb_phase(tb, ALPHA_EM)
    assert za - zb == pytest.approx(ALPHA_EM * math.log(tb / ta))
    assert abs(apply_phase(2.0 + 0j, 0.3)) == pytest.approx(2.0)
    with pytest.raises(SingularityError):
        coulomb_phase(0.0, ALPHA_EM)
