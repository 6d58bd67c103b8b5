"""Tree-level e-e- -> e-e- helicity amplitudes.

Spinor conventions
------------------
Dirac representation. A particle with momentum (|p|, theta, phi) and helicity
lambda = h/2 (h = +-1) has

    u(p, h) = ( sqrt(E+m) chi_h ,  h sqrt(E-m) chi_h )

with the two-component helicity states rotated by D(phi, theta, 0):

    chi_+ = ( e^{-i phi/2} cos(theta/2),  e^{+i phi/2} sin(theta/2) )
    chi_- = (-e^{-i phi/2} sin(theta/2),  e^{+i phi/2} cos(theta/2) )

The half-angle phases make the small-angle limit reproduce
8 pi alpha (s/t) e^{-i l1 (phi1-phi1')} e^{+i l2 (phi2-phi2')} literally, sign
included. Because these phases are double valued in phi, callers that combine
amplitudes with e^{i m phi} factors (half-integer m) can pass the azimuths
explicitly so both use the same branch.

The amplitude is M = e^2 [ J(1'<-1).J(2'<-2) / t  -  J(2'<-1).J(1'<-2) / u ].
"""

from __future__ import annotations

import itertools
import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SingularityError
from .kinematics import M_E, FourMomentum

ALPHA_EM = 1.0 / 137.035999
T_MIN = 1e-6  # keV^2

_I2 = np.eye(2, dtype=complex)
_Z2 = np.zeros((2, 2), dtype=complex)
_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
GAMMA = np.array(
    [np.block([[_I2, _Z2], [_Z2, -_I2]])]
    + [np.block([[_Z2, s], [-s, _Z2]]) for s in _PAULI]
)
_METRIC = np.array([1.0, -1.0, -1.0, -1.0])


class HelicitySet(NamedTuple):
    """Helicities of (k1, k2, k1', k2'); each +1 or -1 meaning +-1/2."""

    lam1: int
    lam2: int
    lam1p: int
    lam2p: int

    def validate(self):
        if any(h not in (1, -1) for h in self):
            raise DomainError(f"helicities must be +-1, got {tuple(self)}")
        return self

    def conserving(self):
        return self.lam1 == self.lam1p and self.lam2 == self.lam2p

    def flipped(self):
        return HelicitySet(*(-h for h in self))


ALL_HELICITIES = tuple(HelicitySet(*h) for h in itertools.product((1, -1), repeat=4))
CONSERVING_HELICITIES = tuple(h for h in ALL_HELICITIES if h.conserving())


def dirac_spinor(E, px, py, pz, h, phi=None, mass=M_E):
    """Positive-energy helicity spinor(s); returns an array of shape (..., 4)."""
    E, px, py, pz = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (E, px, py, pz)))
    pt = np.hypot(px, py)
    theta = np.arctan2(pt, pz)
    if phi is None:
        phi = np.arctan2(py, px)
    phi = np.broadcast_to(np.asarray(phi, dtype=float), E.shape)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    em, ep = np.exp(-0.5j * phi), np.exp(0.5j * phi)
    if h == 1:
        chi = np.stack([em * c, ep * s], axis=-1)
    elif h == -1:
        chi = np.stack([-em * s, ep * c], axis=-1)
    else:
        raise DomainError(f"helicity must be +-1, got {h}")
    up = np.sqrt(E + mass)[..., None] * chi
    # sqrt(E-m) loses digits for slow particles; |p|/sqrt(E+m) does not.
    p3 = np.sqrt(pt * pt + pz * pz)
    lo = (h * p3 / np.sqrt(E + mass))[..., None] * chi
    return np.concatenate([up, lo], axis=-1)


def _sigma_sandwich(p, q):
    """(p^dagger sigma^i q) for i = x, y, z; p and q are two-component arrays."""
    p0, p1 = np.conj(p[..., 0]), np.conj(p[..., 1])
    q0, q1 = q[..., 0], q[..., 1]
    return p0 * q1 + p1 * q0, 1j * (p1 * q0 - p0 * q1), p0 * q0 - p1 * q1


def current(u_out, u_in):
    """ubar(out) gamma^mu u(in), shape (4, ...) with mu first.

    In the Dirac representation gamma^0 gamma^i = [[0, sigma], [sigma, 0]], so
    the current splits into products of the upper (a) and lower (b) halves.
    """
    a_o, b_o = u_out[..., :2], u_out[..., 2:]
    a_i, b_i = u_in[..., :2], u_in[..., 2:]
    j0 = np.sum(np.conj(a_o) * a_i + np.conj(b_o) * b_i, axis=-1)
    x1, y1, z1 = _sigma_sandwich(a_o, b_i)
    x2, y2, z2 = _sigma_sandwich(b_o, a_i)
    return np.stack([j0, x1 + x2, y1 + y2, z1 + z2])


def minkowski(a, b):
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


def _momentum_residual(k1, k2, k1p, k2p):
    tot_in, tot_out = k1 + k2, k1p + k2p
    diff = tot_in - tot_out
    scale = np.abs(tot_in.E)
    return np.max(np.abs([diff.E, diff.px, diff.py, diff.pz]) / scale)


def _spinor(p: FourMomentum, h, phi):
    return dirac_spinor(p.E, p.px, p.py, p.pz, h, phi)


def moller_exact(k1, k2, k1p, k2p, h: HelicitySet, alpha=ALPHA_EM, phis=None, check=True):
    """Exact tree-level Moller helicity amplitude (t- and u-channel, Fermi sign).

    ``phis`` optionally fixes the spinor azimuths (phi1, phi2, phi1', phi2').
    """
    h = HelicitySet(*h).validate()
    if check:
        for p in (k1, k2, k1p, k2p):
            if np.any(p.shell_residual() > 1e-8):
                raise DomainError("momenta must be on the electron mass shell")
        if _momentum_residual(k1, k2, k1p, k2p) > 1e-8:
            raise DomainError("four-momentum is not conserved")
    t = (k1 - k1p).mass2()
    u = (k1 - k2p).mass2()
    if np.any(np.abs(t) < T_MIN) or np.any(np.abs(u) < T_MIN):
        raise SingularityError(f"|t| or |u| below {T_MIN} keV^2 (t={t}, u={u})")
    f1, f2, f1p, f2p = phis if phis is not None else (None,) * 4
    u1 = _spinor(k1, h.lam1, f1)
    u2 = _spinor(k2, h.lam2, f2)
    u1p = _spinor(k1p, h.lam1p, f1p)
    u2p = _spinor(k2p, h.lam2p, f2p)
    direct = minkowski(current(u1p, u1), current(u2p, u2)) / t
    exchange = minkowski(current(u2p, u1), current(u1p, u2)) / u
    out = 4.0 * math.pi * alpha * (direct - exchange)
    return complex(out) if np.ndim(out) == 0 else out


def moller_unpolarized(s, t, u, alpha=ALPHA_EM, mass=M_E):
    """Textbook spin-averaged |M|^2 for e-e- -> e-e- at tree level."""
    m2 = mass * mass
    e4 = (4.0 * math.pi * alpha) ** 2
    a = s - 2 * m2
    return 2.0 * e4 * (
        (a * a + (u - 2 * m2) ** 2 + 4 * m2 * t) / (t * t)
        + (a * a + (t - 2 * m2) ** 2 + 4 * m2 * u) / (u * u)
        + 2.0 * a * (s - 6 * m2) / (t * u)
    )


def moller_ur(s, t, phi1, phi1p, phi2, phi2p, h: HelicitySet, alpha=ALPHA_EM):
    """Ultrarelativistic small-angle helicity amplitude; zero unless helicity is conserved."""
    h = HelicitySet(*h).validate()
    if np.any(np.abs(t) < T_MIN):
        raise SingularityError(f"|t| below {T_MIN} keV^2")
    if not h.conserving():
        return np.zeros(np.broadcast(s, t, phi1).shape, dtype=complex)[()] + 0j
    l1, l2 = 0.5 * h.lam1, 0.5 * h.lam2
    out = (
        8.0 * math.pi * alpha * s / t
        * np.exp(-1j * l1 * (phi1 - phi1p))
        * np.exp(1j * l2 * (phi2 - phi2p))
    )
    return complex(out) if np.ndim(out) == 0 else out


def coulomb_phase(t, alpha):
    """alpha * ln(1/|t|) with t in keV^2; the infrared constant is set to zero."""
    at = np.abs(t)
    if np.any(at < T_MIN):
        raise SingularityError(f"|t| below {T_MIN} keV^2")
    return -alpha * np.log(at)


def apply_phase(m, zeta):
    return m * np.exp(1j * zeta)
