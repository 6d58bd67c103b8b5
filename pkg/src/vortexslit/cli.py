"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numerical failure, 3 I/O error.
Numbers in CSV files use 17 significant digits (``%.17g``), which round-trips
every double exactly and keeps files byte-stable.
"""

from __future__ import annotations

import functools
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, checks
from . import kinematics as kin
from . import montecarlo as mc
from .config import RunConfig, load_config, validate
from .errors import ConfigError, VortexSlitError
from .kinematics import TransverseVector
from .observables import asymmetry_Aperp, fringe_map
from .vortex import Model, smearing_for

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 1, 2, 3
FMT = "%.17g"


def _num(x):
    return FMT % x


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, f"config: {exc}")
        except VortexSlitError as exc:
            _fail(EXIT_NUMERIC, f"{type(exc).__name__}: {exc}")
        except OSError as exc:
            _fail(EXIT_IO, str(exc))

    return wrapper


def common(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
                     help="INI run configuration."),
        click.option("--out", "out", type=click.Path(dir_okay=False), default=None,
                     help="Output file."),
        click.option("--seed", type=int, default=None),
        click.option("--threads", type=int, default=None, help="Worker threads (speed only)."),
        click.option("--model", type=click.Choice(Model.NAMES), default=None),
        click.option("--alpha", type=float, default=None, help="Coulomb-phase strength."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def resolve(config_path, seed, threads, model, alpha) -> RunConfig:
    try:
        cfg = load_config(config_path)
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {config_path}: {exc.strerror}") from None
    over = {k: v for k, v in {"seed": seed, "threads": threads, "model": model, "alpha": alpha}.items()
            if v is not None}
    return validate(cfg.replace(**over)) if over else cfg


def _setup(cfg: RunConfig):
    beams = cfg.beams()
    return beams, cfg.model_obj(), smearing_for(beams, cfg.smearing_nodes), \
        TransverseVector.polar(cfg.k1p_keV, cfg.phi_rad)


def _write(path, text):
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _write_meta(out, command, cfg, extra):
    meta = {
        "command": command,
        "version": __version__,
        "config": cfg.as_dict(),
        "number_format": FMT,
    }
    meta.update(extra)
    _write(Path(out).with_suffix(".meta"), json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@click.group()
@click.version_option(__version__, prog_name="vortexslit")
def main():
    """Two-path interference in vortex-electron scattering."""


@main.command("fringe-map")
@common
@guarded
def fringe_map_cmd(config_path, out, seed, threads, model, alpha):
    """Cross-section map over the K plane, written as CSV."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    beams, mdl, sm, k1p = _setup(cfg)
    fmap = fringe_map(beams, k1p, cfg.grid_spec(), mdl, sm, cfg.edge_cutoff, cfg.threads)
    out = out or "fringe_map.csv"
    buf = io.StringIO()
    buf.write("Kx_keV,Ky_keV,dsigma_arb\n")
    for x, y, v in fmap.rows():
        buf.write(f"{_num(x)},{_num(y)},{_num(v)}\n")
    _write(out, buf.getvalue())
    _write_meta(out, "fringe-map", cfg, {"map": _jsonable(fmap.metadata)})
    if "warning" in fmap.metadata:
        click.echo(f"warning: {fmap.metadata['warning']}", err=True)
    click.echo(f"wrote {out} ({fmap.grid.nx}x{fmap.grid.ny} cells, edge_flags={fmap.metadata['edge_flags']})")


def _aperp(cfg, beams, mdl, sm, k1p):
    return asymmetry_Aperp(beams, k1p, mdl, sm, cfg.n_radial, cfg.n_azimuthal, cfg.edge_cutoff,
                           cfg.threads, cfg.average_phi1p)


@main.command()
@common
@guarded
def asymmetry(config_path, out, seed, threads, model, alpha):
    """Up-down asymmetry A_perp as key=value lines."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    beams, mdl, sm, k1p = _setup(cfg)
    res = _aperp(cfg, beams, mdl, sm, k1p)
    lines = [
        f"A_perp={_num(res.value)}",
        f"error={_num(res.error)}",
        f"model={mdl}",
        f"k1p_keV={_num(cfg.k1p_keV)}",
        f"phi1p_rad={_num(cfg.phi_rad)}",
        f"kappa1_keV={_num(beams[0].kappa)}",
        f"kappa2_keV={_num(beams[1].kappa)}",
        f"two_m1={beams[0].two_m}",
        f"two_m2={beams[1].two_m}",
        f"E1_keV={_num(beams[0].E)}",
        f"smearing_nodes={len(sm)}",
        f"edge_cutoff={_num(cfg.edge_cutoff)}",
        f"grid={res.metadata['grid'][0]}x{res.metadata['grid'][1]}",
        f"k1p_region={res.metadata['k1p_region']}",
        f"approximation={res.metadata['approximation']}",
    ]
    text = "\n".join(lines) + "\n"
    click.echo(text, nl=False)
    if out:
        _write(out, text)
        _write_meta(out, "asymmetry", cfg, {"result": _jsonable(res.metadata)})


@main.command()
@common
@guarded
def scan(config_path, out, seed, threads, model, alpha):
    """A_perp over one parameter, as CSV rows (parameter, A_perp, error)."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    p = cfg.scan.parameter
    rows = [f"{p},A_perp,error"]
    for v in cfg.scan.values():
        c = validate(cfg.with_scan_value(p, v))
        beams, mdl, sm, k1p = _setup(c)
        res = _aperp(c, beams, mdl, sm, k1p)
        rows.append(f"{_num(v)},{_num(res.value)},{_num(res.error)}")
    text = "\n".join(rows) + "\n"
    out = out or "scan.csv"
    _write(out, text)
    _write_meta(out, "scan", cfg, {})
    click.echo(f"wrote {out} ({len(rows) - 1} points)")


@main.command()
@common
@click.option("--n-events", type=int, default=None)
@guarded
def generate(config_path, out, seed, threads, model, alpha, n_events):
    """Unweighted coincidence events as JSON lines."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    if n_events is not None:
        cfg = validate(cfg.replace(n_events=n_events))
    beams, mdl, sm, _ = _setup(cfg)
    spec = mc.K1pSpec(cfg.k1p_keV, None if cfg.ring else cfg.phi_rad)
    ev = mc.sample_events(beams, spec, mdl, sm, cfg.n_events, cfg.seed, cfg.threads, cfg.edge_cutoff)
    out = out or "events.jsonl"
    buf = io.StringIO()
    for i in range(len(ev)):
        buf.write(json.dumps({
            "k1p": [float(ev.k1p[i, 0]), float(ev.k1p[i, 1])],
            "k2p": [float(ev.k2p[i, 0]), float(ev.k2p[i, 1])],
            "weight": float(ev.weight[i]),
            "stream": int(ev.stream[i]),
            "counter": int(ev.counter[i]),
        }, separators=(",", ":")) + "\n")
    _write(out, buf.getvalue())
    _write_meta(out, "generate", cfg, {"sampling": _jsonable(ev.metadata), "n_proposed": ev.n_proposed})
    click.echo(f"wrote {out} ({len(ev)} events, acceptance={ev.acceptance_rate:.4f})")


def read_events(path) -> mc.EventSample:
    k1, k2, w, st, ct = [], [], [], [], []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                r = json.loads(line)
                k1.append(r["k1p"])
                k2.append(r["k2p"])
                w.append(r.get("weight", 1.0))
                st.append(r.get("stream", 0))
                ct.append(r.get("counter", n - 1))
            except (ValueError, KeyError, TypeError):
                raise ConfigError(f"{path}:{n}", "malformed event record") from None
    if not k1:
        raise ConfigError(str(path), "no events")
    return mc.EventSample.from_arrays(np.array(k1), np.array(k2), np.array(w), 0, np.array(st), np.array(ct))


@main.command()
@common
@click.argument("events_path", type=click.Path(dir_okay=False))
@guarded
def reconstruct(config_path, out, seed, threads, model, alpha, events_path):
    """Slice events by |k1'| and histogram K in the k1'-aligned frame."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    ev = read_events(events_path)
    rec = mc.reconstruct(ev, list(cfg.slices_keV), cfg.grid_spec(), cfg.radial_bins)
    out = out or "reconstruct.csv"
    g = rec.grid
    xs, ys = g.x_centers(), g.y_centers()
    buf = io.StringIO()
    buf.write("slice,Kx_keV,Ky_keV,count\n")
    report = [f"n_events={rec.n_events}", f"A_perp_hat={_num(rec.a_perp)}",
              f"A_perp_se={_num(rec.a_perp_error) if rec.a_perp_error is not None else 'nan'}"]
    for i, sl in enumerate(rec.slices):
        lo, hi = sl.k1p_range
        tag = f"slice{i}[{_num(lo)},{_num(hi)})"
        if sl.flagged:
            report.append(f"{tag} n=0 flagged=empty")
            continue
        for a, x in enumerate(xs):
            for b, y in enumerate(ys):
                buf.write(f"{i},{_num(x)},{_num(y)},{int(sl.histogram[a, b])}\n")
        se = _num(sl.a_perp_error) if sl.a_perp_error is not None else "nan"
        mins = ";".join(_num(m) for m in sl.minima_keV)
        report.append(f"{tag} n={sl.n_events} A_perp_hat={_num(sl.a_perp)} se={se} minima_keV={mins}")
    _write(out, buf.getvalue())
    _write_meta(out, "reconstruct", cfg, {"events": str(events_path), "report": report})
    click.echo("\n".join(report))


@main.command("validate")
@common
@click.option("--inject-fault", type=click.Choice(kin.KNOWN_FAULTS), default=None, hidden=True)
@guarded
def validate_cmd(config_path, out, seed, threads, model, alpha, inject_fault):
    """Run the oracle self-tests; exit 2 if any fails."""
    cfg = resolve(config_path, seed, threads, model, alpha)
    beams, _, _, k1p = _setup(cfg)
    if inject_fault:
        with kin.injected_fault(inject_fault):
            results = checks.run_all(beams, k1p, cfg.seed)
    else:
        results = checks.run_all(beams, k1p, cfg.seed)
    text = "\n".join(r.line() for r in results) + "\n"
    click.echo(text, nl=False)
    if out:
        _write(out, text)
    if not all(r.passed for r in results):
        sys.exit(EXIT_NUMERIC)


if __name__ == "__main__":  # pragma: no cover
    main()
