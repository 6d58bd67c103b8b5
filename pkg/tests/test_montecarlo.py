import math

import numpy as np
import pytest

from vortexslit import montecarlo as mc
from vortexslit.errors import DomainError, EnvelopeError
from vortexslit.observables import GridSpec, asymmetry_Aperp, profile_minima
from vortexslit.kinematics import TransverseVector
from vortexslit.vortex import BORN_UR, Model

SPEC = mc.K1pSpec(500.0, 0.0)


@pytest.fixture(scope="module")
def coulomb_events(beams, smearing):
    return mc.sample_events(beams, SPEC, Model(True, 10.0), smearing, 100_000, seed=42)


@pytest.fixture(scope="module")
def born_events(beams, smearing):
    return mc.sample_events(beams, SPEC, BORN_UR, smearing, 1_000_000, seed=7, threads=4)


def test_events_satisfy_record_invariants(coulomb_events):
    ev = coulomb_events
    assert len(ev) == 100_000
    assert np.array_equal(ev.K, ev.k1p + ev.k2p)
    assert np.all(ev.weight == 1.0)
    rec = next(ev.records())
    assert rec.rng_lineage == (42, int(ev.stream[0]), int(ev.counter[0]))
    assert rec.K.x == rec.k1p.x + rec.k2p.x
    assert 0 < ev.acceptance_rate < 1
    assert ev.metadata["acceptance_rate"] == ev.acceptance_rate


def test_events_stay_in_smeared_annulus(coulomb_events, smearing):
    lo, hi = smearing.k_range()
    R = np.hypot(coulomb_events.K[:, 0], coulomb_events.K[:, 1])
    assert R.min() >= lo and R.max() <= hi


def test_same_seed_same_stream(beams, smearing):
    a = mc.sample_events(beams, SPEC, BORN_UR, smearing, 5000, seed=3, threads=1)
    b = mc.sample_events(beams, SPEC, BORN_UR, smearing, 5000, seed=3, threads=4)
    c = mc.sample_events(beams, SPEC, BORN_UR, smearing, 5000, seed=4)
    assert np.array_equal(a.K, b.K) and np.array_equal(a.counter, b.counter)
    assert not np.array_equal(a.K, c.K)
    # a shorter run is a prefix of a longer one
    d = mc.sample_events(beams, SPEC, BORN_UR, smearing, 2000, seed=3)
    assert np.array_equal(d.K, a.K[:2000])


def test_ring_spec_spreads_k1p(beams, smearing):
    ev = mc.sample_events(beams, mc.K1pSpec(500.0, None), BORN_UR, smearing, 20_000, seed=1)
    assert np.allclose(np.hypot(ev.k1p[:, 0], ev.k1p[:, 1]), 500.0)
    phi = np.mod(np.arctan2(ev.k1p[:, 1], ev.k1p[:, 0]), 2 * math.pi)
    counts, _ = np.histogram(phi, bins=8, range=(0, 2 * math.pi))
    assert counts.min() > 0.9 * counts.mean()


def test_envelope_violation_is_reported(beams, smearing):
    s = mc.Sampler(beams, SPEC, BORN_UR, smearing)
    s.envelope = s.envelope * 1e-3
    with pytest.raises(EnvelopeError) as info:
        s.block(0, 0)
    assert {"kappa1", "w", "phi_rel"} <= set(info.value.point)


def test_invalid_inputs(beams, smearing):
    with pytest.raises(DomainError):
        mc.sample_events(beams, SPEC, BORN_UR, smearing, 0, seed=0)
    with pytest.raises(DomainError):
        mc.sample_events(beams, SPEC, BORN_UR, smearing, 10, seed=-1)


def test_rate_estimate():
    r = mc.rate_estimate(1e-6, 1.0)
    assert r.crossings_per_second == pytest.approx(6.2415e9, rel=1e-4)
    assert r.events_per_second == pytest.approx(6241.5, rel=1e-4)
    assert mc.rate_estimate(0.0, 1.0).events_per_second == 0
    assert mc.rate_estimate(1e-6, 2.0).events_per_second == pytest.approx(2 * r.events_per_second)
    custom = mc.rate_estimate(1e-6, 1.0, crossings_per_second=1e9)
    assert custom.events_per_second == pytest.approx(1e3)
    bridged = mc.rate_estimate(sigma_tw=2.0, focal_area=4.0)
    assert bridged.probability_per_crossing == 0.5
    with pytest.raises(DomainError):
        mc.rate_estimate(1e-6, 0.0)


def test_born_asymmetry_consistent_with_zero(born_events):
    a, se = mc.mean_sin(mc.aligned_frame(born_events)[2])
    assert abs(a) < 3 * se


def test_coulomb_asymmetry_matches_quadrature(beams, smearing, coulomb_events):
    quad = asymmetry_Aperp(beams, TransverseVector(500.0, 0.0), Model(True, 10.0), smearing, 128, 256)
    a, se = mc.mean_sin(mc.aligned_frame(coulomb_events)[2])
    assert abs(a - quad.value) < 3 * math.hypot(se, quad.error)


def test_reconstruct_slices_and_flags(coulomb_events):
    grid = GridSpec.square(360.0, 40)
    rec = mc.reconstruct(coulomb_events, [0.0, 400.0, 600.0], grid, radial_bins=50)
    empty, full = rec.slices
    assert empty.flagged and empty.n_events == 0
    assert not full.flagged and full.histogram.sum() == len(coulomb_events)
    assert full.a_perp == rec.a_perp
    assert rec.n_events == len(coulomb_events)
    with pytest.raises(DomainError):
        mc.reconstruct(coulomb_events.head(0), [0.0, 1.0], grid)


def test_aligned_frame_undoes_rotation():
    k1 = np.array([[0.0, 500.0]])
    K = np.array([[-100.0, 150.0]])
    ev = mc.EventSample.from_arrays(k1, K - k1)
    Kx, Ky, s = mc.aligned_frame(ev)
    assert (Kx[0], Ky[0]) == pytest.approx((150.0, 100.0))
    assert s[0] == pytest.approx(-100.0 / math.hypot(150.0, 100.0))


def test_radial_minima_round_trip(beams, smearing, born_events):
    lo, hi = smearing.k_range()
    edges = np.linspace(lo, hi, 61)
    centres = 0.5 * (edges[1:] + edges[:-1])
    probs = mc.polar_expectation(beams, 500.0, BORN_UR, smearing, edges, np.array([-math.pi, math.pi]))
    analytic = profile_minima(centres, probs[:, 0])
    R = np.hypot(*mc.aligned_frame(born_events)[:2])
    counts, _ = np.histogram(R, edges)
    recon = profile_minima(centres, counts)
    width = edges[1] - edges[0]
    assert analytic
    for m in analytic:
        assert min(abs(np.array(recon) - m)) <= width * (1 + 1e-9)


def test_chi2_against_generating_density(beams, smearing, coulomb_events):
    Kx, Ky, _ = mc.aligned_frame(coulomb_events)
    R, x = np.hypot(Kx, Ky), np.arctan2(Ky, Kx)
    r_edges = np.linspace(R.min() * (1 - 1e-12), R.max() * (1 + 1e-12), 25)
    p_edges = np.linspace(-math.pi, math.pi, 13)
    counts, _, _ = np.histogram2d(R, x, bins=[r_edges, p_edges])
    probs = mc.polar_expectation(beams, 500.0, Model(True, 10.0), smearing, r_edges, p_edges)
    assert probs.sum() == pytest.approx(1.0)
    chi2, dof = mc.chi2_per_dof(counts, probs)
    assert dof > 100
    assert 0.7 < chi2 < 1.3
