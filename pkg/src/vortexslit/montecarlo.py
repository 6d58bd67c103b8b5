"""Coincidence-event generation, rate arithmetic and reconstruction.

Sampling works node by node in the (w, phi) coordinates of
``observables``: there the per-node density is bounded and smooth, so plain
accept/reject with a pre-scanned envelope is exact. Random numbers come from
Philox keyed by (seed, stream); stream i generates the i-th block of
``BLOCK`` proposals, so results never depend on how blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from ._parallel import ordered_map
from .errors import DomainError, EnvelopeError
from .kinematics import TransverseVector
from .observables import GridSpec, node_density_w, profile_minima, radius_from_w, w_from_radius, w_max
from .vortex import EDGE_CUTOFF, Model, SmearingGrid

BLOCK = 1 << 16
ENVELOPE_SAFETY = 1.5
PRESCAN = 100
ELECTRON_CHARGE = 1.602176634e-19  # C


@dataclass(frozen=True)
class K1pSpec:
    """Final k1': a fixed vector, or a ring of fixed modulus with uniform azimuth."""

    magnitude: float
    phi: float | None = 0.0

    @property
    def is_ring(self):
        return self.phi is None


@dataclass(frozen=True)
class EventRecord:
    k1p: TransverseVector
    k2p: TransverseVector
    K: TransverseVector
    weight: float
    rng_lineage: tuple  # (seed, stream, counter)


@dataclass
class EventSample:
    k1p: np.ndarray  # (n, 2)
    k2p: np.ndarray
    K: np.ndarray
    weight: np.ndarray
    seed: int
    stream: np.ndarray
    counter: np.ndarray
    n_proposed: int
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weight)

    @property
    def acceptance_rate(self):
        return len(self) / self.n_proposed if self.n_proposed else 0.0

    def records(self):
        for i in range(len(self)):
            yield EventRecord(
                TransverseVector(*self.k1p[i]),
                TransverseVector(*self.k2p[i]),
                TransverseVector(*self.K[i]),
                float(self.weight[i]),
                (self.seed, int(self.stream[i]), int(self.counter[i])),
            )

    def head(self, n):
        return EventSample(self.k1p[:n], self.k2p[:n], self.K[:n], self.weight[:n], self.seed,
                           self.stream[:n], self.counter[:n], self.n_proposed, dict(self.metadata))

    @classmethod
    def from_arrays(cls, k1p, k2p, weight=None, seed=0, stream=None, counter=None):
        k1p, k2p = np.asarray(k1p, float), np.asarray(k2p, float)
        n = len(k1p)
        return cls(k1p, k2p, k1p + k2p,
                   np.ones(n) if weight is None else np.asarray(weight, float), seed,
                   np.zeros(n, np.int64) if stream is None else np.asarray(stream),
                   np.arange(n) if counter is None else np.asarray(counter), n)


def _rng(seed, stream):
    if seed < 0 or stream < 0:
        raise DomainError("seed and stream must be non-negative")
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(stream)))


@dataclass
class Sampler:
    """Per-node envelopes and selection probabilities for one physics setup."""

    beams: tuple
    k1p: K1pSpec
    model: Model
    smearing: SmearingGrid
    edge_cutoff: float = EDGE_CUTOFF

    def __post_init__(self):
        kin.check_frame(self.beams)
        self.w_max = w_max(self.edge_cutoff)
        wc = (np.arange(PRESCAN) + 0.5) / PRESCAN * 2 * self.w_max - self.w_max
        pc = (np.arange(PRESCAN) + 0.5) / PRESCAN * 2 * math.pi - math.pi
        W, P = np.meshgrid(wc, pc, indexing="ij")
        env = []
        for ka, kb in self.smearing.nodes:
            g = node_density_w(self.beams, ka, kb, W.ravel(), P.ravel(), self.k1p.magnitude, self.model)
            env.append(ENVELOPE_SAFETY * float(np.max(g)))
        self.envelope = np.array(env)
        mass = self.smearing.weights * self.envelope
        self.cum = np.cumsum(mass / mass.sum())
        self.cum[-1] = 1.0

    def block(self, seed, stream):
        """Accepted events from one block of proposals (arrays, in proposal order)."""
        rng = _rng(seed, stream)
        u_node = rng.random(BLOCK)
        u_w = rng.random(BLOCK)
        u_phi = rng.random(BLOCK)
        u_acc = rng.random(BLOCK)
        u_rot = rng.random(BLOCK) if self.k1p.is_ring else None
        node = np.searchsorted(self.cum, u_node, side="right")
        ka, kb = self.smearing.nodes[node, 0], self.smearing.nodes[node, 1]
        w = (2.0 * u_w - 1.0) * self.w_max
        x = (2.0 * u_phi - 1.0) * math.pi
        g = node_density_w(self.beams, ka, kb, w, x, self.k1p.magnitude, self.model)
        env = self.envelope[node]
        bad = g > env
        if np.any(bad):
            i = int(np.argmax(bad))
            raise EnvelopeError(
                f"density {g[i]:.6g} exceeds envelope {env[i]:.6g}",
                point={"kappa1": float(ka[i]), "kappa2": float(kb[i]), "w": float(w[i]),
                       "phi_rel": float(x[i]), "stream": stream, "counter": i},
            )
        acc = np.nonzero(u_acc * env < g)[0]
        R = radius_from_w(ka[acc], kb[acc], w[acc])
        phi1p = (2.0 * math.pi * u_rot[acc]) if self.k1p.is_ring else np.full(acc.size, self.k1p.phi)
        phiK = x[acc] + phi1p
        k = self.k1p.magnitude
        k1 = np.stack([k * np.cos(phi1p), k * np.sin(phi1p)], axis=-1)
        K = np.stack([R * np.cos(phiK), R * np.sin(phiK)], axis=-1)
        return k1, K, acc


def sample_events(beams, k1p_spec: K1pSpec, model: Model, smearing: SmearingGrid, n_events,
                  seed, threads=1, edge_cutoff=EDGE_CUTOFF) -> EventSample:
    """Unweighted events from the smeared cross section by accept/reject."""
    if n_events < 1:
        raise DomainError("n_events must be >= 1")
    sampler = Sampler(beams, k1p_spec, model, smearing, edge_cutoff)
    parts, have, stream = [], 0, 0
    batch = max(1, threads)
    while have < n_events:
        streams = list(range(stream, stream + batch))
        for s, res in zip(streams, ordered_map(lambda s: sampler.block(seed, s), streams, threads)):
            if have >= n_events:
                break
            parts.append((s, res))
            have += len(res[2])
        stream += batch
    k1 = np.concatenate([r[0] for _, r in parts])[:n_events]
    K = np.concatenate([r[1] for _, r in parts])[:n_events]
    streams = np.concatenate([np.full(len(r[2]), s, dtype=np.int64) for s, r in parts])[:n_events]
    counters = np.concatenate([r[2] for _, r in parts]).astype(np.int64)[:n_events]
    n_proposed = int(streams[-1]) * BLOCK + int(counters[-1]) + 1
    meta = {
        "model": str(model),
        "k1p": {"magnitude": k1p_spec.magnitude, "phi": k1p_spec.phi},
        "edge_cutoff": edge_cutoff,
        "envelope_safety": ENVELOPE_SAFETY,
        "prescan": [PRESCAN, PRESCAN],
        "block": BLOCK,
        "rng": "philox(key=seed<<64|stream)",
        "approximation": "incoherent kappa smearing",
    }
    k2 = K - k1
    # store K as the exact componentwise sum of the two detected momenta
    out = EventSample(k1, k2, k1 + k2, np.ones(len(k1)), int(seed), streams, counters, n_proposed, meta)
    out.metadata["acceptance_rate"] = out.acceptance_rate
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateEstimate:
    sigma_tw: float | None
    focal_area: float | None
    probability_per_crossing: float
    crossings_per_second: float
    events_per_second: float


def rate_estimate(probability_per_crossing=1e-6, current_nA=1.0, crossings_per_second=None,
                  sigma_tw=None, focal_area=None) -> RateEstimate:
    """Event rate from a per-crossing probability.

    By default one crossing attempt per electron delivered at ``current_nA``;
    pass ``crossings_per_second`` to use a different beam-overlap model.
    """
    if sigma_tw is not None and focal_area is not None:
        if sigma_tw < 0 or focal_area <= 0:
            raise DomainError("need sigma_tw >= 0 and focal_area > 0")
        probability_per_crossing = sigma_tw / focal_area
    if probability_per_crossing < 0 or current_nA <= 0:
        raise DomainError("probability must be >= 0 and current > 0")
    if crossings_per_second is None:
        crossings_per_second = current_nA * 1e-9 / ELECTRON_CHARGE
    return RateEstimate(sigma_tw, focal_area, probability_per_crossing, crossings_per_second,
                        probability_per_crossing * crossings_per_second)


# ---------------------------------------------------------------------------


@dataclass
class SliceResult:
    k1p_range: tuple
    n_events: int
    histogram: np.ndarray | None  # (nx, ny) counts in the k1'-aligned frame
    radial_edges: np.ndarray
    radial_counts: np.ndarray | None
    minima_keV: list
    a_perp: float | None
    a_perp_error: float | None
    flagged: bool = False


@dataclass
class Reconstruction:
    grid: GridSpec
    slices: list
    a_perp: float
    a_perp_error: float
    n_events: int


def aligned_frame(events: EventSample):
    """K rotated so that each event's k1' points along +x; also returns sin(phi1' - phiK)."""
    phi1 = np.arctan2(events.k1p[:, 1], events.k1p[:, 0])
    c, s = np.cos(phi1), np.sin(phi1)
    Kx = c * events.K[:, 0] + s * events.K[:, 1]
    Ky = -s * events.K[:, 0] + c * events.K[:, 1]
    return Kx, Ky, -Ky / np.hypot(Kx, Ky)


def mean_sin(sin_vals):
    n = len(sin_vals)
    if n < 2:
        return (float(sin_vals[0]) if n else None), None
    return float(np.mean(sin_vals)), float(np.std(sin_vals, ddof=1) / math.sqrt(n))


def reconstruct(events: EventSample, slice_edges, grid: GridSpec, radial_bins=60) -> Reconstruction:
    """Slice by |k1'|, histogram K in the k1'-aligned frame, estimate A_perp."""
    if len(events) == 0:
        raise DomainError("no events to reconstruct")
    kmag = np.hypot(events.k1p[:, 0], events.k1p[:, 1])
    Kx, Ky, sins = aligned_frame(events)
    R = np.hypot(Kx, Ky)
    r_edges = np.linspace(0.0, max(abs(grid.kx_min), grid.kx_max, abs(grid.ky_min), grid.ky_max),
                          radial_bins + 1)
    slices = []
    for lo, hi in zip(slice_edges[:-1], slice_edges[1:]):
        sel = (kmag >= lo) & (kmag < hi)
        n = int(np.count_nonzero(sel))
        if n == 0:
            slices.append(SliceResult((lo, hi), 0, None, r_edges, None, [], None, None, flagged=True))
            continue
        hist, _, _ = np.histogram2d(Kx[sel], Ky[sel], bins=[grid.x_edges(), grid.y_edges()])
        rc, _ = np.histogram(R[sel], bins=r_edges)
        centres = 0.5 * (r_edges[1:] + r_edges[:-1])
        a, e = mean_sin(sins[sel])
        slices.append(SliceResult((lo, hi), n, hist, r_edges, rc,
                                  profile_minima(centres, rc), a, e))
    a, e = mean_sin(sins)
    return Reconstruction(grid, slices, a, e, len(events))


def polar_expectation(beams, k, model: Model, smearing: SmearingGrid, r_edges, phi_edges,
                      edge_cutoff=EDGE_CUTOFF, order=12):
    """Bin probabilities of the generating density on a polar (|K|, phi_rel) grid.

    Integrates each node exactly over the part of its (w, phi) strip that maps
    into each bin, with Gauss-Legendre rules of the given order.
    """
    wm = w_max(edge_cutoff)
    xg, wg = np.polynomial.legendre.leggauss(order)
    nr, nphi = len(r_edges) - 1, len(phi_edges) - 1
    probs = np.zeros((nr, nphi))
    for (ka, kb), wt in zip(smearing.nodes, smearing.weights):
        kmin, kmax = abs(ka - kb), ka + kb
        for i in range(nr):
            lo, hi = max(r_edges[i], kmin), min(r_edges[i + 1], kmax)
            if hi <= lo:
                continue
            with np.errstate(divide="ignore"):
                wlo = max(float(w_from_radius(ka, kb, lo)), -wm)
                whi = min(float(w_from_radius(ka, kb, hi)), wm)
            if whi <= wlo:
                continue
            wq = 0.5 * (whi - wlo) * xg + 0.5 * (whi + wlo)
            for j in range(nphi):
                plo, phi_hi = phi_edges[j], phi_edges[j + 1]
                pq = 0.5 * (phi_hi - plo) * xg + 0.5 * (phi_hi + plo)
                W, P = np.meshgrid(wq, pq, indexing="ij")
                g = node_density_w(beams, ka, kb, W, P, k, model)
                probs[i, j] += wt * 0.25 * (whi - wlo) * (phi_hi - plo) * (wg @ g @ wg)
    return probs / probs.sum()


def chi2_per_dof(counts, expected_probs, min_expected=5.0):
    n = counts.sum()
    exp = expected_probs * n
    use = exp >= min_expected
    chi2 = float(np.sum((counts[use] - exp[use]) ** 2 / exp[use]))
    dof = int(np.count_nonzero(use)) - 1
    return chi2 / dof, dof
