"""Run configuration: INI-style files with section headers.

Grammar (every key optional unless stated; units in the key name)::

    [beam1]            # exactly one of E_MeV / kz_keV
    E_MeV = 2.1
    kappa_keV = 200
    two_m = 1          # 2m, odd integer
    helicity = 1
    sigma_keV = 10

    [beam2]            # neither E_MeV nor kz_keV: kz = -kz(beam1)
    kappa_keV = 100
    two_m = 13
    sigma_keV = 5

    [final]
    k1p_keV = 500
    phi_rad = 0
    ring = false       # sample phi1' uniformly (generate only)

    [model]
    name = born-ur     # born-ur | coulomb-ur | born-exact | coulomb-exact
    alpha = 0.0072973525693

    [grid]
    half_width_keV = 360
    n = 400            # or kx_min_keV ... ny for a rectangular grid

    [smearing]
    nodes = 7
    edge_cutoff = 1e-6

    [asymmetry]
    n_radial = 256
    n_azimuthal = 512
    average_phi1p = false

    [run]
    seed = 0
    threads = 1
    n_events = 100000

    [scan]
    parameter = alpha  # two_m1 two_m2 kappa1 kappa2 k1p_mag alpha
    start = 0.001
    stop = 0.01
    steps = 10

    [reconstruct]
    slices_keV = 0, 1e9
    radial_bins = 60

Defaults reproduce the parameter set of the reference fringe-map figure.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError
from .kinematics import BesselBeam
from .observables import GridSpec
from .vortex import Model

SCAN_PARAMETERS = ("two_m1", "two_m2", "kappa1", "kappa2", "k1p_mag", "alpha")


@dataclass(frozen=True)
class BeamBlock:
    E_MeV: float | None = None
    kz_keV: float | None = None
    kappa_keV: float = 200.0
    two_m: int = 1
    helicity: int = 1
    sigma_keV: float = 10.0


@dataclass(frozen=True)
class ScanBlock:
    parameter: str = "alpha"
    start: float = 1e-3
    stop: float = 1e-2
    steps: int = 10

    def values(self):
        if self.steps == 1:
            return [self.start]
        return [self.start + (self.stop - self.start) * i / (self.steps - 1) for i in range(self.steps)]


@dataclass(frozen=True)
class RunConfig:
    beam1: BeamBlock = BeamBlock(E_MeV=2.1, kappa_keV=200.0, two_m=1, sigma_keV=10.0)
    beam2: BeamBlock = BeamBlock(kappa_keV=100.0, two_m=13, sigma_keV=5.0)
    k1p_keV: float = 500.0
    phi_rad: float = 0.0
    ring: bool = False
    model: str = "born-ur"
    alpha: float | None = None
    grid: tuple = (-360.0, 360.0, -360.0, 360.0, 400, 400)
    smearing_nodes: int = 7
    edge_cutoff: float = 1e-6
    n_radial: int = 256
    n_azimuthal: int = 512
    average_phi1p: bool = False
    seed: int = 0
    threads: int = 1
    n_events: int = 100000
    scan: ScanBlock = ScanBlock()
    slices_keV: tuple = (0.0, 1e9)
    radial_bins: int = 60
    extra: dict = field(default_factory=dict, compare=False)

    # -- derived objects -------------------------------------------------

    def beams(self):
        b1 = _beam(self.beam1, "beam1", direction=1, kz_default=None)
        b2 = _beam(self.beam2, "beam2", direction=-1, kz_default=-b1.kz)
        if not math.isclose(b2.kz, -b1.kz, rel_tol=1e-12, abs_tol=1e-9):
            raise ConfigError("beam2.kz_keV", "the frame requires kz2 = -kz1")
        return b1, b2

    def model_obj(self):
        try:
            return Model.parse(self.model, self.alpha)
        except DomainError as exc:
            raise ConfigError("model", str(exc)) from None

    def grid_spec(self):
        return GridSpec(*self.grid)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d.pop("extra")
        return d

    def with_scan_value(self, parameter, value):
        """Copy with one scan parameter set."""
        if parameter == "two_m1":
            return self.replace(beam1=dataclasses.replace(self.beam1, two_m=int(value)))
        if parameter == "two_m2":
            return self.replace(beam2=dataclasses.replace(self.beam2, two_m=int(value)))
        if parameter == "kappa1":
            return self.replace(beam1=dataclasses.replace(self.beam1, kappa_keV=float(value)))
        if parameter == "kappa2":
            return self.replace(beam2=dataclasses.replace(self.beam2, kappa_keV=float(value)))
        if parameter == "k1p_mag":
            return self.replace(k1p_keV=float(value))
        if parameter == "alpha":
            return self.replace(alpha=float(value))
        raise ConfigError("scan.parameter", f"unknown parameter {parameter!r}; expected one of {SCAN_PARAMETERS}")


def _beam(block: BeamBlock, name, direction, kz_default):
    if block.E_MeV is not None and block.kz_keV is not None:
        raise ConfigError(f"{name}.E_MeV", "give exactly one of E_MeV and kz_keV")
    try:
        if block.E_MeV is not None:
            return BesselBeam.from_energy(1000.0 * block.E_MeV, block.kappa_keV, block.two_m,
                                          block.helicity, block.sigma_keV, direction)
        kz = block.kz_keV if block.kz_keV is not None else kz_default
        if kz is None:
            raise ConfigError(f"{name}.E_MeV", "give exactly one of E_MeV and kz_keV")
        return BesselBeam.from_kz(kz, block.kappa_keV, block.two_m, block.helicity, block.sigma_keV)
    except DomainError as exc:
        raise ConfigError(name, str(exc)) from None


# ---------------------------------------------------------------------------


def _get(parser, section, key, conv, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None


def _bool(raw):
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _int(raw):
    f = float(raw)
    if f != int(f):
        raise ValueError(raw)
    return int(f)


def _floats(raw):
    return tuple(float(x) for x in raw.replace(",", " ").split())


_KNOWN = {
    "beam1": {"e_mev", "kz_kev", "kappa_kev", "two_m", "helicity", "sigma_kev"},
    "beam2": {"e_mev", "kz_kev", "kappa_kev", "two_m", "helicity", "sigma_kev"},
    "final": {"k1p_kev", "phi_rad", "ring"},
    "model": {"name", "alpha"},
    "grid": {"half_width_kev", "n", "kx_min_kev", "kx_max_kev", "ky_min_kev", "ky_max_kev", "nx", "ny"},
    "smearing": {"nodes", "edge_cutoff"},
    "asymmetry": {"n_radial", "n_azimuthal", "average_phi1p"},
    "run": {"seed", "threads", "n_events"},
    "scan": {"parameter", "start", "stop", "steps"},
    "reconstruct": {"slices_kev", "radial_bins"},
}


def _beam_block(p, sec, base: BeamBlock):
    if not p.has_section(sec):
        return base
    E = _get(p, sec, "E_MeV", float, None)
    kz = _get(p, sec, "kz_keV", float, None)
    if E is None and kz is None:
        E, kz = base.E_MeV, base.kz_keV
    return BeamBlock(
        E_MeV=E,
        kz_keV=kz,
        kappa_keV=_get(p, sec, "kappa_keV", float, base.kappa_keV),
        two_m=_get(p, sec, "two_m", _int, base.two_m),
        helicity=_get(p, sec, "helicity", _int, base.helicity),
        sigma_keV=_get(p, sec, "sigma_keV", float, base.sigma_keV),
    )


def parse_config(text: str) -> RunConfig:
    p = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    for sec in p.sections():
        if sec not in _KNOWN:
            raise ConfigError(sec, "unknown section")
        for key in p.options(sec):
            if key not in _KNOWN[sec]:
                raise ConfigError(f"{sec}.{key}", "unknown key")
    d = RunConfig()
    g = d.grid
    if p.has_option("grid", "half_width_keV") or p.has_option("grid", "n"):
        hw = _get(p, "grid", "half_width_keV", float, g[1])
        n = _get(p, "grid", "n", _int, g[4])
        g = (-hw, hw, -hw, hw, n, n)
    g = (
        _get(p, "grid", "kx_min_keV", float, g[0]),
        _get(p, "grid", "kx_max_keV", float, g[1]),
        _get(p, "grid", "ky_min_keV", float, g[2]),
        _get(p, "grid", "ky_max_keV", float, g[3]),
        _get(p, "grid", "nx", _int, g[4]),
        _get(p, "grid", "ny", _int, g[5]),
    )
    cfg = RunConfig(
        beam1=_beam_block(p, "beam1", d.beam1),
        beam2=_beam_block(p, "beam2", d.beam2),
        k1p_keV=_get(p, "final", "k1p_keV", float, d.k1p_keV),
        phi_rad=_get(p, "final", "phi_rad", float, d.phi_rad),
        ring=_get(p, "final", "ring", _bool, d.ring),
        model=_get(p, "model", "name", str, d.model).strip(),
        alpha=_get(p, "model", "alpha", float, d.alpha),
        grid=g,
        smearing_nodes=_get(p, "smearing", "nodes", _int, d.smearing_nodes),
        edge_cutoff=_get(p, "smearing", "edge_cutoff", float, d.edge_cutoff),
        n_radial=_get(p, "asymmetry", "n_radial", _int, d.n_radial),
        n_azimuthal=_get(p, "asymmetry", "n_azimuthal", _int, d.n_azimuthal),
        average_phi1p=_get(p, "asymmetry", "average_phi1p", _bool, d.average_phi1p),
        seed=_get(p, "run", "seed", _int, d.seed),
        threads=_get(p, "run", "threads", _int, d.threads),
        n_events=_get(p, "run", "n_events", _int, d.n_events),
        scan=ScanBlock(
            parameter=_get(p, "scan", "parameter", str, d.scan.parameter).strip(),
            start=_get(p, "scan", "start", float, d.scan.start),
            stop=_get(p, "scan", "stop", float, d.scan.stop),
            steps=_get(p, "scan", "steps", _int, d.scan.steps),
        ),
        slices_keV=_get(p, "reconstruct", "slices_keV", _floats, d.slices_keV),
        radial_bins=_get(p, "reconstruct", "radial_bins", _int, d.radial_bins),
    )
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        validate(cfg)
        return cfg
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(cfg: RunConfig):
    """Raise ConfigError naming the first offending field."""
    cfg.beams()
    cfg.model_obj()
    x0, x1, y0, y1, nx, ny = cfg.grid
    if not (x1 > x0 and y1 > y0):
        raise ConfigError("grid", "need kx_max > kx_min and ky_max > ky_min")
    if nx < 1 or ny < 1:
        raise ConfigError("grid.n", "grid needs at least one cell per axis")
    if cfg.k1p_keV <= 0:
        raise ConfigError("final.k1p_keV", "must be positive")
    if cfg.smearing_nodes < 1 or cfg.smearing_nodes % 2 == 0:
        raise ConfigError("smearing.nodes", "must be a positive odd integer")
    if not 0 < cfg.edge_cutoff < 0.5:
        raise ConfigError("smearing.edge_cutoff", "must lie in (0, 0.5)")
    if cfg.n_radial < 2 or cfg.n_azimuthal < 2:
        raise ConfigError("asymmetry.n_radial", "quadrature grid too small")
    if cfg.seed < 0:
        raise ConfigError("run.seed", "must be non-negative")
    if cfg.threads < 1:
        raise ConfigError("run.threads", "must be >= 1")
    if cfg.n_events < 1:
        raise ConfigError("run.n_events", "must be >= 1")
    if cfg.scan.parameter not in SCAN_PARAMETERS:
        raise ConfigError("scan.parameter", f"expected one of {SCAN_PARAMETERS}")
    if cfg.scan.steps < 1:
        raise ConfigError("scan.steps", "must be >= 1")
    s = cfg.slices_keV
    if len(s) < 2 or any(b <= a for a, b in zip(s, s[1:])):
        raise ConfigError("reconstruct.slices_keV", "need at least two increasing edges")
    if cfg.radial_bins < 1:
        raise ConfigError("reconstruct.radial_bins", "must be >= 1")
    return cfg
