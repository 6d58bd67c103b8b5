"""Two-path vortex amplitude, smearing and the differential cross section.

All densities are in arbitrary units: every flux/regularisation constant is
set to one, so only shapes, ratios and asymmetries carry meaning.

Smearing is an incoherent average of (1/4) sum_h |J|^2 over a tensor grid of
cone radii (kappa1, kappa2). Each node keeps the longitudinal momentum of its
beam and re-derives the energy on shell, which keeps the balanced frame.
The per-node Jacobian (kappa1 kappa2 / 2 Delta)^2 is only logarithmically
integrable over K, so nodes ignore points with Delta < edge_cutoff*kappa1*kappa2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import kinematics as kin
from .amplitudes import (
    ALL_HELICITIES,
    ALPHA_EM,
    T_MIN,
    HelicitySet,
    apply_phase,
    coulomb_phase,
    current,
    dirac_spinor,
    minkowski,
    moller_exact,
    moller_ur,
)
from .errors import (
    DomainError,
    EdgeSingularError,
    NoSolutionError,
    QuadratureError,
    SingularityError,
)
from .kinematics import M_E, BesselBeam, ConfigPair, FourMomentum, TransverseVector

EDGE_CUTOFF = 1e-6


@dataclass(frozen=True)
class Model:
    """One of the four amplitude pipelines.

    ``alpha`` is the Coulomb-phase strength; None means Born (no phase).
    The amplitude coupling itself is always the physical fine-structure constant.
    """

    ur: bool = True
    alpha: float | None = None

    NAMES = ("born-ur", "coulomb-ur", "born-exact", "coulomb-exact")

    @classmethod
    def parse(cls, name, alpha=None):
        if name not in cls.NAMES:
            raise DomainError(f"unknown model {name!r}; expected one of {cls.NAMES}")
        coulomb = name.startswith("coulomb")
        if coulomb and alpha is None:
            raise DomainError(f"model {name} needs alpha")
        return cls(ur=name.endswith("-ur"), alpha=float(alpha) if coulomb else None)

    @property
    def name(self):
        return ("coulomb" if self.alpha is not None else "born") + ("-ur" if self.ur else "-exact")

    def __str__(self):
        return self.name if self.alpha is None else f"{self.name}(alpha={self.alpha!r})"


BORN_UR = Model(ur=True)


@dataclass(frozen=True)
class TwoPathAmplitude:
    m_a: complex
    m_b: complex
    c_a: complex
    c_b: complex
    prefactor: float
    global_phase: float

    def total(self):
        return (
            np.exp(1j * self.global_phase)
            * self.prefactor
            * (self.c_a * self.m_a + self.c_b * self.m_b)
        )


@dataclass(frozen=True)
class SmearingGrid:
    nodes: np.ndarray  # (n, 2) of (kappa1, kappa2)
    weights: np.ndarray
    descriptor: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.weights)

    @classmethod
    def single(cls, kappa1, kappa2):
        return cls(np.array([[kappa1, kappa2]], dtype=float), np.array([1.0]),
                   {"kind": "none", "kappa1": kappa1, "kappa2": kappa2})

    def k_range(self):
        k1, k2 = self.nodes[:, 0], self.nodes[:, 1]
        return float(np.min(np.abs(k1 - k2))), float(np.max(k1 + k2))


def _gauss_axis(kbar, sigma, n):
    if sigma == 0:
        return np.array([kbar]), np.array([1.0])
    x, w = np.polynomial.legendre.leggauss(n)
    x = 3.0 * sigma * x
    w = w * np.exp(-0.5 * (x / sigma) ** 2)
    return kbar + x, w


def make_smearing(kappa_bar1, sigma1, kappa_bar2, sigma2, n_nodes=7) -> SmearingGrid:
    """Tensor-product Gauss-Legendre rule for two Gaussians truncated at +-3 sigma."""
    if n_nodes < 1 or n_nodes % 2 == 0:
        raise DomainError(f"n_nodes must be a positive odd integer, got {n_nodes}")
    if sigma1 < 0 or sigma2 < 0:
        raise DomainError("smearing widths must be non-negative")
    if kappa_bar1 - 3 * sigma1 <= 0 or kappa_bar2 - 3 * sigma2 <= 0:
        raise DomainError("smearing reaches kappa <= 0")
    x1, w1 = _gauss_axis(kappa_bar1, sigma1, n_nodes)
    x2, w2 = _gauss_axis(kappa_bar2, sigma2, n_nodes)
    nodes = np.array([(a, b) for a in x1 for b in x2])
    weights = np.outer(w1, w2).ravel()
    desc = {"kind": "gauss-legendre", "kappa_bar1": kappa_bar1, "sigma1": sigma1,
            "kappa_bar2": kappa_bar2, "sigma2": sigma2, "n_nodes": n_nodes,
            "coherence": "incoherent"}
    return SmearingGrid(nodes, weights / weights.sum(), desc)


def smearing_for(beams, n_nodes=7):
    b1, b2 = beams
    return make_smearing(b1.kappa, b1.sigma, b2.kappa, b2.sigma, n_nodes)


# ---------------------------------------------------------------------------
# Scalar, object-level route (generic orientation)


def _path_phase(two_m1, two_m2, d1, d2):
    return 0.5 * two_m1 * d1 + 0.5 * two_m2 * d2


def two_path_amplitude(beams, config: ConfigPair, k1p, k2p, h, use_ur=True,
                       alpha_phase=None, alpha=ALPHA_EM) -> TwoPathAmplitude:
    b1, b2 = beams
    h = HelicitySet(*h).validate()
    K = k1p + k2p
    s = (b1.E + b2.E) ** 2 - K.dot(K)
    phi1p, phi2p = k1p.azimuth(), k2p.azimuth()
    phis = {
        "a": (config.phiK + config.delta1, config.phiK - config.delta2),
        "b": (config.phiK - config.delta1, config.phiK + config.delta2),
    }
    amps, ts = {}, {}
    if use_ur:
        for path, k1 in (("a", config.k1a), ("b", config.k1b)):
            q = k1 - k1p
            ts[path] = -q.dot(q)
            f1, f2 = phis[path]
            amps[path] = moller_ur(s, ts[path], f1, phi1p, f2, phi2p, h, alpha)
    else:
        _, (p1, p2) = kin.solve_final_longitudinal(beams, k1p, k2p)
        for path in ("a", "b"):
            k1, k2 = kin.initial_momenta(beams, config, path)
            ts[path] = (k1 - p1).mass2()
            f1, f2 = phis[path]
            amps[path] = moller_exact(k1, k2, p1, p2, h, alpha, phis=(f1, f2, phi1p, phi2p))
    if alpha_phase is not None:
        for path in amps:
            amps[path] = apply_phase(amps[path], coulomb_phase(ts[path], alpha_phase))
    if config.area <= 0:
        raise EdgeSingularError("degenerate triangle: the two paths coincide")
    psi = _path_phase(b1.two_m, b2.two_m, config.delta1, config.delta2)
    return TwoPathAmplitude(
        m_a=complex(amps["a"]),
        m_b=complex(amps["b"]),
        c_a=complex(np.exp(1j * psi)),
        c_b=complex(np.exp(-1j * psi)),
        prefactor=b1.kappa * b2.kappa / (2.0 * config.area),
        global_phase=0.5 * (b1.two_m - b2.two_m) * config.phiK,
    )


def j_squared_unpolarized_ur(kappa1, kappa2, K, k1p: TransverseVector, s, m1, m2,
                             phiK=None, alpha=ALPHA_EM, alpha_phase=None):
    """(1/4) sum over helicities of |J|^2 in the small-angle limit, closed form.

    ``K`` is the modulus; ``phiK`` its azimuth (defaults to that of k1', i.e.
    K parallel to k1'). ``alpha_phase`` adds the Coulomb phase difference to the
    fringe phase, which is all the phase does to this sum.
    """
    if phiK is None:
        phiK = k1p.azimuth()
    d1, d2, area = kin.triangle_angles(kappa1, kappa2, K)
    if np.any(area <= 0):
        raise EdgeSingularError("annulus edge: Jacobian 1/Delta diverges")
    k = k1p.modulus()
    x = phiK - k1p.azimuth()
    ta = -(kappa1**2 + k**2 - 2 * kappa1 * k * np.cos(x + d1))
    tb = -(kappa1**2 + k**2 - 2 * kappa1 * k * np.cos(x - d1))
    phase = 2 * m1 * d1 + 2 * m2 * d2
    if alpha_phase is not None:
        phase = phase + coulomb_phase(ta, alpha_phase) - coulomb_phase(tb, alpha_phase)
    bracket = 1 / ta**2 + 1 / tb**2 + 2 / (ta * tb) * np.cos(phase) * np.cos(d1) * np.cos(d2)
    return 64 * math.pi**2 * alpha**2 * s**2 * kappa1**2 * kappa2**2 / (4 * area**2) * bracket


# ---------------------------------------------------------------------------
# Vectorised route used for maps, quadrature and sampling. Works in the frame
# where k1' lies along +x; x is the azimuth of K relative to k1'.


def _geometry(kappa1, kappa2, R):
    d1, d2, _ = kin._triangle(kappa1, kappa2, R)
    return d1, d2


def reduced_ur(kappa1, kappa2, E1, E2, R, x, k, two_m1, two_m2, model: Model):
    """(1/4) sum_h |c_a M_a + c_b M_b|^2 without the Jacobian prefactor (UR pipelines)."""
    d1, d2 = _geometry(kappa1, kappa2, R)
    s = (E1 + E2) ** 2 - R * R
    ta = -(kappa1 * kappa1 + k * k - 2 * kappa1 * k * np.cos(x + d1))
    tb = -(kappa1 * kappa1 + k * k - 2 * kappa1 * k * np.cos(x - d1))
    if np.any(np.abs(ta) < T_MIN) or np.any(np.abs(tb) < T_MIN):
        raise SingularityError("momentum transfer hits the photon pole")
    phase = two_m1 * d1 + two_m2 * d2
    if model.alpha is not None:
        phase = phase + model.alpha * (np.log(np.abs(tb)) - np.log(np.abs(ta)))
    bracket = 1 / (ta * ta) + 1 / (tb * tb) + 2 / (ta * tb) * np.cos(phase) * np.cos(d1) * np.cos(d2)
    return 64 * math.pi**2 * ALPHA_EM**2 * s * s * bracket


def helicity_sum_ur(kappa1, kappa2, E1, E2, R, x, k, two_m1, two_m2, model: Model):
    """Same quantity as reduced_ur, summed channel by channel from the UR amplitude."""
    d1, d2 = _geometry(kappa1, kappa2, R)
    s = (E1 + E2) ** 2 - R * R
    phi2p = np.arctan2(R * np.sin(x), R * np.cos(x) - k)
    paths = {"a": (x + d1, x - d2, 1.0), "b": (x - d1, x + d2, -1.0)}
    psi = _path_phase(two_m1, two_m2, d1, d2)
    total = 0.0
    for h in ALL_HELICITIES:
        amp = 0.0
        for f1, f2, sign in paths.values():
            t = -(kappa1 * kappa1 + k * k - 2 * kappa1 * k * np.cos(f1))
            m = moller_ur(s, t, f1, 0.0, f2, phi2p, h)
            if model.alpha is not None:
                m = apply_phase(m, coulomb_phase(t, model.alpha))
            amp = amp + np.exp(sign * 1j * psi) * m
        total = total + np.abs(amp) ** 2
    return total / 4.0


def reduced_exact(kappa1, kappa2, E1, E2, kz, R, x, k, two_m1, two_m2, model: Model):
    """Same as reduced_ur but from explicit spinors and full four-momenta."""
    d1, d2 = _geometry(kappa1, kappa2, R)
    kappa1, kappa2, E1, E2, kz, R, x, d1, d2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (kappa1, kappa2, E1, E2, kz, R, x, d1, d2))
    )
    W = E1 + E2
    Kx, Ky = R * np.cos(x), R * np.sin(x)
    k2x, k2y = Kx - k, Ky
    z, E1p, E2p = kin.final_longitudinal(W, k * k, k2x * k2x + k2y * k2y)
    if np.any(np.isnan(z)):
        raise NoSolutionError("final state kinematically closed")
    zero = np.zeros_like(R)
    fin1 = (E1p, k + zero, zero, z)
    fin2 = (E2p, k2x, k2y, -z)
    phi2p = np.arctan2(k2y, k2x)
    sp_f1 = {hh: dirac_spinor(*fin1, hh, zero) for hh in (1, -1)}
    sp_f2 = {hh: dirac_spinor(*fin2, hh, phi2p) for hh in (1, -1)}
    psi = _path_phase(two_m1, two_m2, d1, d2)
    e2 = 4 * math.pi * ALPHA_EM
    path_amps = []
    for f1, f2, sign in ((x + d1, x - d2, 1.0), (x - d1, x + d2, -1.0)):
        a1x, a1y = kappa1 * np.cos(f1), kappa1 * np.sin(f1)
        ini1 = (E1, a1x, a1y, kz)
        ini2 = (E2, Kx - a1x, Ky - a1y, -kz)
        t = (E1 - E1p) ** 2 - (a1x - k) ** 2 - a1y**2 - (kz - z) ** 2
        u = (E1 - E2p) ** 2 - (a1x - k2x) ** 2 - (a1y - k2y) ** 2 - (kz + z) ** 2
        if np.any(np.abs(t) < T_MIN) or np.any(np.abs(u) < T_MIN):
            raise SingularityError("momentum transfer hits the photon pole")
        sp1 = {hh: dirac_spinor(*ini1, hh, f1) for hh in (1, -1)}
        sp2 = {hh: dirac_spinor(*ini2, hh, f2) for hh in (1, -1)}
        coef = np.exp(sign * 1j * psi)
        if model.alpha is not None:
            coef = coef * np.exp(1j * coulomb_phase(t, model.alpha))
        pairs = [(o, i) for o in (1, -1) for i in (1, -1)]
        j11 = {p: current(sp_f1[p[0]], sp1[p[1]]) for p in pairs}
        j22 = {p: current(sp_f2[p[0]], sp2[p[1]]) for p in pairs}
        j21 = {p: current(sp_f2[p[0]], sp1[p[1]]) for p in pairs}
        j12 = {p: current(sp_f1[p[0]], sp2[p[1]]) for p in pairs}
        amps = {}
        for h in ALL_HELICITIES:
            direct = minkowski(j11[h.lam1p, h.lam1], j22[h.lam2p, h.lam2]) / t
            exch = minkowski(j21[h.lam2p, h.lam1], j12[h.lam1p, h.lam2]) / u
            amps[h] = coef * e2 * (direct - exch)
        path_amps.append(amps)
    total = 0.0
    for h in ALL_HELICITIES:
        total = total + np.abs(path_amps[0][h] + path_amps[1][h]) ** 2
    return total / 4.0


def node_reduced(beam1: BesselBeam, beam2: BesselBeam, kappa1, kappa2, R, x, k, model: Model):
    """Reduced density for smearing node(s); beams supply kz and two_m."""
    E1 = np.sqrt(M_E**2 + beam1.kz**2 + kappa1 * kappa1)
    E2 = np.sqrt(M_E**2 + beam2.kz**2 + kappa2 * kappa2)
    if model.ur:
        # the small-angle form never solves the longitudinal kinematics, so
        # check separately that the final state is energetically allowed
        k2sq = R * R + k * k - 2.0 * R * k * np.cos(x)
        z, _, _ = kin.final_longitudinal(E1 + E2, k * k, k2sq)
        if np.any(np.isnan(z)):
            raise NoSolutionError("final state kinematically closed")
        return reduced_ur(kappa1, kappa2, E1, E2, R, x, k, beam1.two_m, beam2.two_m, model)
    return reduced_exact(kappa1, kappa2, E1, E2, beam1.kz, R, x, k, beam1.two_m, beam2.two_m, model)


def dsigma_polar(beams, k, R, x, smearing: SmearingGrid, model: Model, edge_cutoff=EDGE_CUTOFF):
    """Smeared density on points given by |K| = R and relative azimuth x.

    Returns (values, edge_flags): edge_flags counts (point, node) pairs that
    fell inside a node's annulus but within the edge cutoff.
    """
    b1, b2 = beams
    R = np.asarray(R, dtype=float)
    x = np.asarray(x, dtype=float)
    R, x = np.broadcast_arrays(R, x)
    out = np.zeros(R.shape)
    flags = 0
    for (ka, kb), w in zip(smearing.nodes, smearing.weights):
        inside = kin.in_annulus(ka, kb, R)
        if not np.any(inside):
            continue
        _, _, area = kin._triangle(ka, kb, np.where(inside, R, ka + kb))
        good = inside & (area >= edge_cutoff * ka * kb)
        flags += int(np.count_nonzero(inside & ~good))
        if not np.any(good):
            continue
        red = node_reduced(b1, b2, ka, kb, R[good], x[good], k, model)
        pref = (ka * kb / (2.0 * area[good])) ** 2
        out[good] += w * pref * red
    return out, flags


def dsigma(beams, k1p: TransverseVector, K: TransverseVector, smearing: SmearingGrid,
           model: Model = BORN_UR, edge_cutoff=EDGE_CUTOFF):
    """Smeared (1/4) sum_h |J|^2 at one (k1', K), arbitrary units."""
    kin.check_frame(beams)
    R = K.modulus()
    x = K.azimuth() - k1p.azimuth()
    val, flags = dsigma_polar(beams, k1p.modulus(), R, x, smearing, model, edge_cutoff)
    if flags and len(smearing) == 1:
        raise EdgeSingularError(f"|K| = {R} sits on the annulus edge of an unsmeared beam pair")
    return float(val)


# ---------------------------------------------------------------------------
# Brute-force oracle for the closed form


def _gauss(x, eps):
    return np.exp(-0.5 * (x / eps) ** 2) / (math.sqrt(2 * math.pi) * eps)


def _oracle_amplitudes(beams, K, k1p, k2p, helicities, amplitude):
    """Integrand amplitude as a function of (k1x, k1y, phi1, phi2), vectorised."""
    b1, b2 = beams
    s = (b1.E + b2.E) ** 2 - K.dot(K)
    phi1p, phi2p = k1p.azimuth(), k2p.azimuth()
    if amplitude == "ur":
        def amps(k1x, k1y, phi1, phi2):
            t = -((k1x - k1p.x) ** 2 + (k1y - k1p.y) ** 2)
            return np.stack([moller_ur(s, t, phi1, phi1p, phi2, phi2p, h) for h in helicities])
        return amps
    if amplitude == "exact":
        _, (p1, p2) = kin.solve_final_longitudinal(beams, k1p, k2p)

        def amps(k1x, k1y, phi1, phi2):
            k1 = FourMomentum.on_shell(TransverseVector(k1x, k1y), b1.kz)
            k2 = FourMomentum.on_shell(TransverseVector(K.x - k1x, K.y - k1y), b2.kz)
            return np.stack([
                moller_exact(k1, k2, p1, p2, h, phis=(phi1, phi2, phi1p, phi2p), check=False)
                for h in helicities
            ])
        return amps
    raise DomainError(f"unknown amplitude {amplitude!r}")


def _regularized_J(beams, K, amps, n_h, eps, n_theta, rtol):
    """Integral with both radial deltas replaced by Gaussians of width eps."""
    b1, b2 = beams
    kap1, kap2 = b1.kappa, b2.kappa
    Kmag, phiK = K.modulus(), K.azimuth()
    m1, m2 = b1.m, b2.m
    xg, wg = np.polynomial.legendre.leggauss(n_theta)
    xg2, wg2 = np.polynomial.legendre.leggauss(n_theta // 2)
    reach = 10.0 * eps

    def windows(r):
        # |theta| range on which |K - k1| lies within +-reach of kappa2
        def theta_at(rho):
            c = (r * r + Kmag * Kmag - rho * rho) / (2 * r * Kmag)
            return math.acos(min(1.0, max(-1.0, c)))
        lo, hi = theta_at(max(kap2 - reach, 0.0)), theta_at(kap2 + reach)
        if hi <= lo:
            return []
        return [(lo, hi), (-hi, -lo)]

    def inner(r, nodes, wts):
        acc = np.zeros(n_h, dtype=complex)
        for a, b in windows(r):
            th = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            phi1 = phiK + th
            k1x, k1y = r * np.cos(phi1), r * np.sin(phi1)
            k2x, k2y = K.x - k1x, K.y - k1y
            rho = np.hypot(k2x, k2y)
            phi2 = np.arctan2(k2y, k2x)
            weight = _gauss(rho - kap2, eps) * np.exp(1j * (m1 * phi1 - m2 * phi2))
            acc += 0.5 * (b - a) * (amps(k1x, k1y, phi1, phi2) * weight) @ wts
        return acc

    def outer(r):
        val = inner(r, xg, wg) * r * _gauss(r - kap1, eps)
        return np.concatenate([val.real, val.imag])

    lo, hi = max(kap1 - reach, 1e-9), kap1 + reach
    res, err = integrate.quad_vec(outer, lo, hi, epsrel=rtol * 1e-3, epsabs=0.0, limit=400)
    # inner-rule check at the ring itself
    fine, coarse = inner(kap1, xg, wg), inner(kap1, xg2, wg2)
    scale = max(np.max(np.abs(fine)), 1e-300)
    inner_err = float(np.max(np.abs(fine - coarse)) / scale)
    return res[:n_h] + 1j * res[n_h:], float(err), inner_err


def brute_force_J(beams, K: TransverseVector, k1p: TransverseVector, k2p: TransverseVector,
                  h=None, epsilon=1.0, amplitude="ur", n_theta=192, rtol=1e-3):
    """Numerically integrate the constrained two-cone integral for J.

    The radial delta functions become normalised Gaussians of width epsilon;
    three widths (eps, eps/2, eps/4) are combined by Richardson extrapolation
    in eps^2. ``h`` may be one HelicitySet or a sequence; the return value
    matches (complex or array of complex).
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    single = h is None or isinstance(h, HelicitySet) or (len(h) == 4 and np.isscalar(h[0]))
    hs = [HelicitySet(*(h or (1, 1, 1, 1)))] if single else [HelicitySet(*x) for x in h]
    amps = _oracle_amplitudes(beams, K, k1p, k2p, hs, amplitude)
    vals, diags = [], {}
    for j, eps in enumerate((epsilon, epsilon / 2, epsilon / 4)):
        v, qerr, ierr = _regularized_J(beams, K, amps, len(hs), eps, n_theta, rtol)
        vals.append(v)
        diags[f"eps{j}"] = {"epsilon": eps, "outer_err": qerr, "inner_rel_err": ierr}
    I1, I2, I4 = vals
    r_a = (4 * I2 - I1) / 3
    r_b = (4 * I4 - I2) / 3
    extrap = (16 * r_b - r_a) / 15
    scale = max(float(np.max(np.abs(extrap))), 1e-300)
    est = np.abs(extrap - r_b) / scale
    diags["richardson_rel_err"] = est.tolist()
    worst_inner = max(d["inner_rel_err"] for k, d in diags.items() if k.startswith("eps"))
    if np.max(np.abs(extrap)) > 0 and (np.max(est) > rtol or worst_inner > rtol):
        raise QuadratureError("brute-force integral did not converge", diags)
    brute_force_J.last_diagnostics = diags
    return complex(extrap[0]) if single else extrap


brute_force_J.last_diagnostics = {}


def closed_form_J(beams, K: TransverseVector, k1p, k2p, h, use_ur=True, alpha_phase=None):
    config = kin.two_configurations(beams[0].kappa, beams[1].kappa, K)
    return two_path_amplitude(beams, config, k1p, k2p, h, use_ur, alpha_phase).total()
