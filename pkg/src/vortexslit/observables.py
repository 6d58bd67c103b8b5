"""Fringe maps, radial profiles, fringe contrast and the up-down asymmetry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from . import kinematics as kin
from ._parallel import chunk_slices, ordered_map
from .errors import ConsistencyError, ContrastUndefinedError
from .kinematics import TransverseVector
from .vortex import EDGE_CUTOFF, Model, SmearingGrid, dsigma_polar, node_reduced


@dataclass(frozen=True)
class GridSpec:
    kx_min: float
    kx_max: float
    ky_min: float
    ky_max: float
    nx: int
    ny: int

    @classmethod
    def square(cls, half_width, n):
        return cls(-half_width, half_width, -half_width, half_width, n, n)

    @staticmethod
    def _centers(lo, hi, n):
        # offsets from the midpoint are exact negatives of each other, which
        # keeps mirrored cells bit-identical
        h = (hi - lo) / n
        return 0.5 * (lo + hi) + (np.arange(n) - 0.5 * (n - 1)) * h

    def x_centers(self):
        return self._centers(self.kx_min, self.kx_max, self.nx)

    def y_centers(self):
        return self._centers(self.ky_min, self.ky_max, self.ny)

    def x_edges(self):
        return np.linspace(self.kx_min, self.kx_max, self.nx + 1)

    def y_edges(self):
        return np.linspace(self.ky_min, self.ky_max, self.ny + 1)

    def covers(self, kmax):
        return (self.kx_min <= -kmax and self.kx_max >= kmax
                and self.ky_min <= -kmax and self.ky_max >= kmax)

    def as_tuple(self):
        return (self.kx_min, self.kx_max, self.ky_min, self.ky_max, self.nx, self.ny)


@dataclass
class FringeMap:
    k1p: TransverseVector
    grid: GridSpec
    values: np.ndarray  # shape (nx, ny); values[i, j] at (x_i, y_j)
    model: str
    smearing: dict
    metadata: dict = field(default_factory=dict)

    def rows(self):
        """(Kx, Ky, value) in row-major order: x outer, y inner."""
        xs, ys = self.grid.x_centers(), self.grid.y_centers()
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                yield x, y, self.values[i, j]


def fringe_map(beams, k1p: TransverseVector, grid: GridSpec, model: Model,
               smearing: SmearingGrid, edge_cutoff=EDGE_CUTOFF, threads=1) -> FringeMap:
    """Cell-centre evaluation of the smeared cross section over the K plane."""
    kin.check_frame(beams)
    xs, ys = grid.x_centers(), grid.y_centers()
    KX, KY = np.meshgrid(xs, ys, indexing="ij")
    R = np.hypot(KX, KY).ravel()
    X = (np.arctan2(KY, KX) - k1p.azimuth()).ravel()
    k = float(k1p.modulus())

    def work(sl):
        return dsigma_polar(beams, k, R[sl], X[sl], smearing, model, edge_cutoff)

    parts = ordered_map(work, chunk_slices(R.size), threads)
    values = np.concatenate([p[0] for p in parts]).reshape(KX.shape)
    flags = sum(p[1] for p in parts)
    kmin, kmax = smearing.k_range()
    meta = {
        "model": str(model),
        "edge_flags": flags,
        "edge_cutoff": edge_cutoff,
        "annulus_keV": [kmin, kmax],
        "smearing": dict(smearing.descriptor),
        "approximation": "incoherent kappa smearing",
    }
    if not grid.covers(kmax):
        meta["warning"] = "grid does not cover the smeared annulus"
    return FringeMap(k1p, grid, values, str(model), dict(smearing.descriptor), meta)


# ---------------------------------------------------------------------------


@dataclass
class RadialProfile:
    K: np.ndarray
    values: np.ndarray
    interference: np.ndarray  # cos(Phi) cos(delta1) cos(delta2)
    fringe_phase: np.ndarray  # Phi = 2 m1 delta1 + 2 m2 delta2
    phi: float

    def fringe_factor(self):
        return np.cos(self.fringe_phase)


def _fringe_terms(beams, R):
    b1, b2 = beams
    d1, d2, _ = kin._triangle(b1.kappa, b2.kappa, R)
    phase = b1.two_m * d1 + b2.two_m * d2
    return np.cos(phase) * np.cos(d1) * np.cos(d2), phase


def radial_profile(beams, k1p: TransverseVector, phi, n_samples=2001, model: Model = None,
                   smearing: SmearingGrid = None, edge_cutoff=EDGE_CUTOFF) -> RadialProfile:
    """Cross section along the ray at azimuth ``phi``, strictly inside the central annulus."""
    b1, b2 = beams
    model = model or Model()
    smearing = smearing or SmearingGrid.single(b1.kappa, b2.kappa)
    kmin, kmax = kin.ring_bounds(b1.kappa, b2.kappa)
    R = kmin + (np.arange(n_samples) + 0.5) * (kmax - kmin) / n_samples
    x = np.full_like(R, phi - k1p.azimuth())
    vals, _ = dsigma_polar(beams, float(k1p.modulus()), R, x, smearing, model, edge_cutoff)
    inter, phase = _fringe_terms(beams, R)
    return RadialProfile(R, vals, inter, phase, phi)


def profile_from_map(fmap: FringeMap, phi, n_samples=400) -> RadialProfile:
    """Bilinear cut through a stored map (k1' along +x)."""
    interp = RegularGridInterpolator(
        (fmap.grid.x_centers(), fmap.grid.y_centers()), fmap.values,
        bounds_error=False, fill_value=0.0,
    )
    rmax = min(abs(fmap.grid.kx_min), fmap.grid.kx_max, abs(fmap.grid.ky_min), fmap.grid.ky_max)
    R = (np.arange(n_samples) + 0.5) * rmax / n_samples
    pts = np.stack([R * np.cos(phi), R * np.sin(phi)], axis=-1)
    vals = interp(pts)
    nan = np.full_like(R, np.nan)
    return RadialProfile(R, vals, nan, nan, phi)


def count_sign_changes(values):
    s = np.sign(np.asarray(values))
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def expected_sign_changes(beams):
    """round(|Phi(K_min) - Phi(K_max)| / pi) from the triangle edge limits."""
    b1, b2 = beams
    kmin, kmax = kin.ring_bounds(b1.kappa, b2.kappa)
    edges = []
    for R in (kmin, kmax):
        if R == 0:
            # equal cones: delta1 = delta2 = pi/2 at the centre
            edges.append((b1.two_m + b2.two_m) * math.pi / 2)
            continue
        d1, d2, _ = kin._triangle(b1.kappa, b2.kappa, R)
        edges.append(b1.two_m * float(d1) + b2.two_m * float(d2))
    return round(abs(edges[0] - edges[1]) / math.pi)


def _extrema(values):
    v = np.asarray(values, dtype=float)
    d = np.sign(np.diff(v))
    # carry the last non-zero slope across plateaus
    for i in range(1, len(d)):
        if d[i] == 0:
            d[i] = d[i - 1]
    turns = np.nonzero(d[1:] != d[:-1])[0] + 1
    out = []
    for i in turns:
        if d[i - 1] > 0 and d[i] < 0:
            out.append((i, "max"))
        elif d[i - 1] < 0 and d[i] > 0:
            out.append((i, "min"))
    return out


def fringe_contrast(values):
    """Mean (Imax - Imin)/(Imax + Imin) over neighbouring interior extrema."""
    v = np.asarray(values, dtype=float)
    ext = _extrema(v)
    kinds = {k for _, k in ext}
    if kinds != {"max", "min"}:
        raise ContrastUndefinedError("profile needs at least one interior maximum and minimum")
    c = []
    for (i, ki), (j, kj) in zip(ext, ext[1:]):
        if ki == kj:
            continue
        hi, lo = (v[i], v[j]) if ki == "max" else (v[j], v[i])
        if hi + lo > 0:
            c.append((hi - lo) / (hi + lo))
    if not c:
        raise ContrastUndefinedError("no adjacent max/min pair")
    return float(np.mean(c))


def profile_minima(K, values):
    return [float(K[i]) for i, kind in _extrema(values) if kind == "min"]


# ---------------------------------------------------------------------------
# A_perp. Each smearing node is integrated over its own annulus in the
# variable w = logit((R^2 - Kmin^2) / (Kmax^2 - Kmin^2)); in (w, phi) the
# measure d^2K times the Jacobian (k1 k2 / 2 Delta)^2 is the constant k1 k2 / 2,
# and the edge cutoff Delta >= eta k1 k2 becomes |w| <= w_max(eta).


def w_max(edge_cutoff=EDGE_CUTOFF):
    return 2.0 * math.acosh(1.0 / (2.0 * edge_cutoff))


def radius_from_w(kappa1, kappa2, w):
    a = (kappa1 - kappa2) ** 2
    return np.sqrt(a + 4.0 * kappa1 * kappa2 * special.expit(w))


def w_from_radius(kappa1, kappa2, R):
    a = (kappa1 - kappa2) ** 2
    return special.logit(np.clip((R * R - a) / (4.0 * kappa1 * kappa2), 0.0, 1.0))


def node_density_w(beams, kappa1, kappa2, w, x, k, model):
    """Cross-section density per unit (w, phi) for one node."""
    R = radius_from_w(kappa1, kappa2, w)
    return 0.5 * kappa1 * kappa2 * node_reduced(beams[0], beams[1], kappa1, kappa2, R, x, k, model)


def symmetric_centers(lo, hi, n):
    h = (hi - lo) / n
    return 0.5 * (lo + hi) + (np.arange(n) - 0.5 * (n - 1)) * h, h


@dataclass
class AsymmetryResult:
    value: float
    error: float
    numerator: float
    denominator: float
    metadata: dict


def _aperp_pass(beams, k, model, smearing, n_r, n_phi, edge_cutoff, threads):
    wm = w_max(edge_cutoff)
    ws, dw = symmetric_centers(-wm, wm, n_r)
    phis, dphi = symmetric_centers(-math.pi, math.pi, n_phi)
    sin_w = -np.sin(phis)  # sin(phi1' - phiK) with phi = phiK - phi1'
    W, P = np.meshgrid(ws, phis, indexing="ij")
    Wf, Pf = W.ravel(), P.ravel()
    S = np.broadcast_to(sin_w, W.shape).ravel()
    num = den = 0.0
    for (ka, kb), wt in zip(smearing.nodes, smearing.weights):
        def work(sl):
            g = node_density_w(beams, ka, kb, Wf[sl], Pf[sl], k, model)
            return np.sum(g), np.sum(g * S[sl])

        parts = ordered_map(work, chunk_slices(Wf.size), threads)
        den += wt * math.fsum(p[0] for p in parts) * dw * dphi
        num += wt * math.fsum(p[1] for p in parts) * dw * dphi
    return num, den


def asymmetry_Aperp(beams, k1p: TransverseVector, model: Model, smearing: SmearingGrid,
                    n_radial=256, n_azimuthal=512, edge_cutoff=EDGE_CUTOFF, threads=1,
                    average_phi1p=False) -> AsymmetryResult:
    """A_perp = int dsigma sin(phi1' - phiK) / int dsigma over the smeared annulus at fixed k1'.

    The value comes from a grid with twice the requested resolution in each
    direction; the error estimate is its difference to the requested grid.
    """
    kin.check_frame(beams)
    k = float(k1p.modulus())
    coarse = _aperp_pass(beams, k, model, smearing, n_radial, n_azimuthal, edge_cutoff, threads)
    fine = _aperp_pass(beams, k, model, smearing, 2 * n_radial, 2 * n_azimuthal, edge_cutoff, threads)
    if not (coarse[1] > 0 and fine[1] > 0):
        raise ConsistencyError("total cross section is not positive")
    a_coarse, a_fine = coarse[0] / coarse[1], fine[0] / fine[1]
    meta = {
        "model": str(model),
        "k1p_keV": k,
        "k1p_region": "phi1' averaged (rotation invariant)" if average_phi1p else "fixed vector",
        "grid": [2 * n_radial, 2 * n_azimuthal],
        "edge_cutoff": edge_cutoff,
        "w_max": w_max(edge_cutoff),
        "smearing": dict(smearing.descriptor),
        "approximation": "incoherent kappa smearing",
    }
    return AsymmetryResult(a_fine, abs(a_fine - a_coarse), fine[0], fine[1], meta)
