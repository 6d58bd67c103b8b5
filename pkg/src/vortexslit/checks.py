"""Self-test oracle suite behind ``vortexslit validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kinematics as kin
from .amplitudes import ALL_HELICITIES, CONSERVING_HELICITIES, moller_exact, moller_unpolarized
from .kinematics import FourMomentum, TransverseVector
from .observables import asymmetry_Aperp
from .vortex import BORN_UR, SmearingGrid, brute_force_J, closed_form_J, helicity_sum_ur, reduced_ur


@dataclass
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.residual) and self.residual <= self.tolerance)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} residual={self.residual:.3e} tol={self.tolerance:.0e}"


def random_scattering(beams, rng, k1p_max=600.0):
    """Random on-shell 2 -> 2 configuration with initial momenta on the two cones."""
    b1, b2 = beams
    while True:
        k1 = TransverseVector.polar(b1.kappa, rng.uniform(0, 2 * math.pi))
        k2 = TransverseVector.polar(b2.kappa, rng.uniform(0, 2 * math.pi))
        k1p = TransverseVector.polar(rng.uniform(0.05, 1.0) * k1p_max, rng.uniform(0, 2 * math.pi))
        k2p = k1 + k2 - k1p
        try:
            _, (p1, p2) = kin.solve_final_longitudinal(beams, k1p, k2p)
        except kin.NoSolutionError:
            continue
        q1 = FourMomentum.on_shell(k1, b1.kz)
        q2 = FourMomentum.on_shell(k2, b2.kz)
        if abs((q1 - p1).mass2()) > 1.0 and abs((q1 - p2).mass2()) > 1.0:
            return q1, q2, p1, p2


def interior_points(beams, n, rng, margin=0.05):
    b1, b2 = beams
    lo, hi = kin.ring_bounds(b1.kappa, b2.kappa)
    span = hi - lo
    R = rng.uniform(lo + margin * span, hi - margin * span, n)
    phi = rng.uniform(0, 2 * math.pi, n)
    return [TransverseVector.polar(r, p) for r, p in zip(R, phi)]


def check_oracle(beams, k1p, rng, n_points=2):
    worst = 0.0
    for K in interior_points(beams, n_points, rng, margin=0.1):
        k2p = K - k1p
        hs = list(CONSERVING_HELICITIES)
        bf = brute_force_J(beams, K, k1p, k2p, hs)
        for h, v in zip(hs, bf):
            cf = closed_form_J(beams, K, k1p, k2p, h)
            worst = max(worst, abs(v - cf) / abs(cf))
    return CheckResult("brute-force J vs closed form", worst, 1e-3)


def check_helicity_sum(beams, k1p, rng, n_points=50):
    b1, b2 = beams
    lo, hi = kin.ring_bounds(b1.kappa, b2.kappa)
    R = rng.uniform(lo, hi, n_points)
    x = rng.uniform(-math.pi, math.pi, n_points)
    k = k1p.modulus()
    a = reduced_ur(b1.kappa, b2.kappa, b1.E, b2.E, R, x, k, b1.two_m, b2.two_m, BORN_UR)
    b = helicity_sum_ur(b1.kappa, b2.kappa, b1.E, b2.E, R, x, k, b1.two_m, b2.two_m, BORN_UR)
    return CheckResult("unpolarized closed form vs helicity sum", float(np.max(np.abs(a / b - 1))), 1e-10)


def check_moller(beams, rng, n_points=200):
    worst = 0.0
    for _ in range(n_points):
        q1, q2, p1, p2 = random_scattering(beams, rng)
        tot = sum(abs(moller_exact(q1, q2, p1, p2, h)) ** 2 for h in ALL_HELICITIES) / 4
        s, t, u = (q1 + q2).mass2(), (q1 - p1).mass2(), (q1 - p2).mass2()
        ref = moller_unpolarized(s, t, u)
        worst = max(worst, abs(tot / ref - 1))
    return CheckResult("spin-summed Moller vs textbook", worst, 1e-8)


def check_born_symmetry(beams, k1p, rng, n_points=8):
    """Mirror K about the k1' axis and compare the spin-summed two-path |J|^2."""
    axis = k1p.azimuth()
    worst = 0.0
    for K in interior_points(beams, n_points, rng):
        Km = K.mirrored(axis)
        vals = []
        for KK in (K, Km):
            vals.append(sum(abs(closed_form_J(beams, KK, k1p, KK - k1p, h)) ** 2
                            for h in CONSERVING_HELICITIES))
        worst = max(worst, abs(vals[0] - vals[1]) / max(vals))
    return CheckResult("Born mirror symmetry", worst, 1e-9)


def check_aperp_born(beams, k1p):
    b1, b2 = beams
    res = asymmetry_Aperp(beams, k1p, BORN_UR, SmearingGrid.single(b1.kappa, b2.kappa),
                          n_radial=64, n_azimuthal=128)
    return CheckResult("A_perp Born zero", abs(res.value), 1e-12)


def run_all(beams, k1p, seed=0):
    rng = np.random.default_rng(seed)
    return [
        check_oracle(beams, k1p, rng),
        check_helicity_sum(beams, k1p, rng),
        check_moller(beams, rng),
        check_born_symmetry(beams, k1p, rng),
        check_aperp_born(beams, k1p),
    ]
