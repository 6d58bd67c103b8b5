"""Transverse-plane geometry and four-momentum bookkeeping.

Natural units, everything in keV. The collision frame is fixed: both vortex
beams share the z axis and carry balanced longitudinal momenta,
``beam2.kz == -beam1.kz``. Functions accept scalars or numpy arrays wherever
that is cheap; array inputs broadcast elementwise.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, NoSolutionError, OutOfSupportError

M_E = 510.998950  # keV
TWO_PI = 2.0 * math.pi

# Relative slack when deciding whether |K| sits on the annulus.
_SUPPORT_RTOL = 1e-12

# Mutation hooks for the validation suite. Never set in normal operation.
_FAULTS: set[str] = set()
KNOWN_FAULTS = ("config-sign",)


@contextlib.contextmanager
def injected_fault(name):
    """Temporarily corrupt one piece of the kinematics (self-test use only)."""
    if name not in KNOWN_FAULTS:
        raise ValueError(f"unknown fault {name!r}")
    _FAULTS.add(name)
    try:
        yield
    finally:
        _FAULTS.discard(name)


def wrap_angle(phi):
    """Map angles onto [0, 2pi)."""
    out = np.mod(phi, TWO_PI)
    out = np.where(out >= TWO_PI, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TransverseVector:
    x: float
    y: float

    @classmethod
    def polar(cls, r, phi):
        return cls(r * np.cos(phi), r * np.sin(phi))

    def modulus(self):
        return np.hypot(self.x, self.y)

    def azimuth(self):
        return wrap_angle(np.arctan2(self.y, self.x))

    def rotated(self, theta):
        c, s = np.cos(theta), np.sin(theta)
        return TransverseVector(c * self.x - s * self.y, s * self.x + c * self.y)

    def mirrored(self, axis_phi=0.0):
        """Reflect about the line through the origin at azimuth ``axis_phi``."""
        c, s = np.cos(2 * axis_phi), np.sin(2 * axis_phi)
        return TransverseVector(c * self.x + s * self.y, s * self.x - c * self.y)

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def __add__(self, other):
        return TransverseVector(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return TransverseVector(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return TransverseVector(-self.x, -self.y)

    def __mul__(self, k):
        return TransverseVector(k * self.x, k * self.y)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FourMomentum:
    E: float
    px: float
    py: float
    pz: float

    @classmethod
    def on_shell(cls, pt: TransverseVector, pz, mass=M_E):
        E = np.sqrt(mass * mass + pt.x * pt.x + pt.y * pt.y + pz * pz)
        return cls(E, pt.x, pt.y, pz)

    @property
    def transverse(self):
        return TransverseVector(self.px, self.py)

    def p3(self):
        return np.sqrt(self.px**2 + self.py**2 + self.pz**2)

    def dot(self, other):
        return self.E * other.E - self.px * other.px - self.py * other.py - self.pz * other.pz

    def mass2(self):
        return self.dot(self)

    def shell_residual(self, mass=M_E):
        return np.abs(self.mass2() - mass * mass) / self.E**2

    def __add__(self, other):
        return FourMomentum(self.E + other.E, self.px + other.px, self.py + other.py, self.pz + other.pz)

    def __sub__(self, other):
        return FourMomentum(self.E - other.E, self.px - other.px, self.py - other.py, self.pz - other.pz)


@dataclass(frozen=True)
class BesselBeam:
    """A monochromatic Bessel vortex electron.

    ``two_m`` stores twice the (half-integer) total angular momentum projection;
    ``helicity`` is +1 or -1 for lambda = +1/2 or -1/2.
    """

    E: float
    kz: float
    kappa: float
    two_m: int
    helicity: int = 1
    sigma: float = 0.0

    def __post_init__(self):
        if int(self.two_m) != self.two_m or self.two_m % 2 == 0:
            raise DomainError(f"two_m must be an odd integer, got {self.two_m}")
        if self.helicity not in (1, -1):
            raise DomainError(f"helicity must be +1 or -1, got {self.helicity}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")
        if self.sigma < 0 or self.sigma >= self.kappa:
            raise DomainError(f"need 0 <= sigma < kappa, got sigma={self.sigma}")
        shell = M_E**2 + self.kz**2 + self.kappa**2
        if abs(self.E**2 - shell) > 1e-10 * self.E**2:
            raise DomainError("beam energy is off the mass shell")

    @classmethod
    def from_energy(cls, E, kappa, two_m, helicity=1, sigma=0.0, direction=1):
        kz2 = E * E - M_E * M_E - kappa * kappa
        if kz2 <= 0:
            raise DomainError(f"energy {E} keV too low for kappa={kappa} keV")
        return cls(E, math.copysign(math.sqrt(kz2), direction), kappa, two_m, helicity, sigma)

    @classmethod
    def from_kz(cls, kz, kappa, two_m, helicity=1, sigma=0.0):
        E = math.sqrt(M_E * M_E + kz * kz + kappa * kappa)
        return cls(E, kz, kappa, two_m, helicity, sigma)

    @property
    def m(self):
        return self.two_m / 2.0

    def with_kappa(self, kappa):
        """Same longitudinal momentum, different cone; energy re-derived on shell."""
        E = math.sqrt(M_E * M_E + self.kz * self.kz + kappa * kappa)
        return replace(self, E=E, kappa=kappa)


def check_frame(beams):
    b1, b2 = beams
    if not b1.kz > 0:
        raise DomainError("beam 1 must move along +z")
    if abs(b1.kz + b2.kz) > 1e-10 * abs(b1.kz):
        raise DomainError("beams must have balanced longitudinal momenta (k2z = -k1z)")


@dataclass(frozen=True)
class ConfigPair:
    k1a: TransverseVector
    k2a: TransverseVector
    k1b: TransverseVector
    k2b: TransverseVector
    delta1: float
    delta2: float
    area: float
    phiK: float

    @property
    def K(self):
        return self.k1a + self.k2a


def ring_bounds(kappa1, kappa2):
    if not (kappa1 > 0 and kappa2 > 0):
        raise DomainError("cone radii must be positive")
    return abs(kappa1 - kappa2), kappa1 + kappa2


def _triangle(kappa1, kappa2, K):
    """Unchecked triangle angles; arrays welcome."""
    K = np.asarray(K, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        c1 = (kappa1 * kappa1 + K * K - kappa2 * kappa2) / (2.0 * kappa1 * K)
        c2 = (kappa2 * kappa2 + K * K - kappa1 * kappa1) / (2.0 * kappa2 * K)
    d1 = np.arccos(np.clip(c1, -1.0, 1.0))
    d2 = np.arccos(np.clip(c2, -1.0, 1.0))
    area = 0.5 * K * kappa1 * np.sin(d1)
    return d1, d2, area


def in_annulus(kappa1, kappa2, K):
    kmin, kmax = abs(kappa1 - kappa2), kappa1 + kappa2
    slack = _SUPPORT_RTOL * kmax
    return (K >= kmin - slack) & (K <= kmax + slack) & (K > 0)


def triangle_angles(kappa1, kappa2, K):
    """Interior angles (delta1, delta2) and area of the (kappa1, kappa2, |K|) triangle."""
    ring_bounds(kappa1, kappa2)
    if not np.all(in_annulus(kappa1, kappa2, np.asarray(K))):
        raise OutOfSupportError(f"|K| = {K} outside the annulus of ({kappa1}, {kappa2})")
    d1, d2, area = _triangle(kappa1, kappa2, K)
    if np.ndim(d1) == 0:
        return float(d1), float(d2), float(area)
    return d1, d2, area


def two_configurations(kappa1, kappa2, K: TransverseVector) -> ConfigPair:
    """The two initial transverse-momentum pairs on the cones that add up to K."""
    Kmag = K.modulus()
    d1, d2, area = triangle_angles(kappa1, kappa2, Kmag)
    phiK = K.azimuth()
    sb = -1.0 if "config-sign" in _FAULTS else 1.0
    k1a = TransverseVector.polar(kappa1, phiK + d1)
    k1b = TransverseVector.polar(kappa1, phiK - sb * d1)
    # Close each triangle exactly on K rather than trusting the second arccos.
    k2a = K - k1a
    k2b = K - k1b
    return ConfigPair(k1a, k2a, k1b, k2b, d1, d2, area, phiK)


def final_longitudinal(W, pt1_sq, pt2_sq, mass=M_E):
    """Vectorised closed-form root of E1'(z) + E2'(z) = W with z = k1z' >= 0.

    Returns (z, E1', E2'); z is NaN where the channel is closed.
    """
    A = mass * mass + pt1_sq
    B = mass * mass + pt2_sq
    E1 = (W * W + A - B) / (2.0 * W)
    z2 = E1 * E1 - A
    open_ = W > np.sqrt(A) + np.sqrt(B)
    z = np.where(open_, np.sqrt(np.where(open_, np.maximum(z2, 0.0), 0.0)), np.nan)
    return z, E1, W - E1


def solve_final_longitudinal(beams, k1p: TransverseVector, k2p: TransverseVector):
    """Final longitudinal momentum k1z' (k2z' = -k1z') and both final four-momenta."""
    check_frame(beams)
    W = beams[0].E + beams[1].E
    a2 = k1p.x**2 + k1p.y**2
    b2 = k2p.x**2 + k2p.y**2
    z, _, _ = final_longitudinal(W, a2, b2)
    if np.any(np.isnan(z)):
        raise NoSolutionError(
            f"total energy {W} keV below threshold for |k1'|^2={a2}, |k2'|^2={b2}"
        )
    p1 = FourMomentum.on_shell(k1p, z)
    p2 = FourMomentum.on_shell(k2p, -z)
    resid = np.abs(p1.E + p2.E - W)
    if np.any(resid > 1e-12 * W):
        raise NoSolutionError(f"energy residual {np.max(resid)} keV above tolerance")
    return (float(z) if np.ndim(z) == 0 else z), (p1, p2)


def initial_momenta(beams, config: ConfigPair, path):
    k1t, k2t = (config.k1a, config.k2a) if path == "a" else (config.k1b, config.k2b)
    return (
        FourMomentum.on_shell(k1t, beams[0].kz),
        FourMomentum.on_shell(k2t, beams[1].kz),
    )


def mandelstam(k1, k2, k1p, k2p):
    s = (k1 + k2).mass2()
    t = (k1 - k1p).mass2()
    u = (k1 - k2p).mass2()
    return s, t, u


def t_difference(config: ConfigPair, k1p: TransverseVector):
    kappa1 = config.k1a.modulus()
    return (
        4.0 * k1p.modulus() * kappa1 * np.sin(config.delta1)
        * np.sin(k1p.azimuth() - config.phiK)
    )
