import json

import pytest
from click.testing import CliRunner

from vortexslit.cli import main
from vortexslit.config import RunConfig, load_config, parse_config
from vortexslit.errors import ConfigError


@pytest.fixture
def run(tmp_path):
    runner = CliRunner()

    def invoke(*args, config=None):
        argv = list(args)
        if config is not None:
            path = tmp_path / "run.ini"
            path.write_text(config)
            argv += ["--config", str(path)]
        return runner.invoke(main, argv, catch_exceptions=False)

    return invoke


# -- configuration ----------------------------------------------------------


def test_defaults_are_reference_parameters():
    cfg = load_config(None)
    b1, b2 = cfg.beams()
    assert b1.E == pytest.approx(2100.0)
    assert (b1.kappa, b2.kappa, b1.two_m, b2.two_m) == (200.0, 100.0, 1, 13)
    assert b2.kz == -b1.kz
    assert cfg.k1p_keV == 500.0


def test_parse_full_file():
    cfg = parse_config("""
[beam1]
kz_keV = 2000   # comment
kappa_keV = 150
two_m = 3
[beam2]
kappa_keV = 90
two_m = 5
helicity = -1
sigma_keV = 0
[model]
name = coulomb-exact
alpha = 0.5
[grid]
kx_min_keV = -10
kx_max_keV = 30
ny = 7
[run]
seed = 12
[scan]
parameter = two_m2
start = 1
stop = 9
steps = 5
[reconstruct]
slices_keV = 100, 300, 700
""")
    b1, b2 = cfg.beams()
    assert b1.kz == 2000.0 and b2.kz == -2000.0 and b2.helicity == -1
    assert cfg.model_obj().name == "coulomb-exact"
    assert cfg.grid == (-10.0, 30.0, -360.0, 360.0, 400, 7)
    assert cfg.scan.values() == [1, 3, 5, 7, 9]
    assert cfg.slices_keV == (100.0, 300.0, 700.0)
    assert cfg.with_scan_value("two_m2", 7).beam2.two_m == 7


@pytest.mark.parametrize("text, field", [
    ("[beam1]\nE_MeV = 2.1\nkz_keV = 100\n", "beam1.E_MeV"),
    ("[beam1]\ntwo_m = 2\n", "beam1"),
    ("[beam1]\nkappa_keV = abc\n", "beam1.kappa_keV"),
    ("[model]\nname = coulomb-ur\n", "model"),
    ("[grid]\nn = 0\n", "grid.n"),
    ("[smearing]\nnodes = 4\n", "smearing.nodes"),
    ("[scan]\nparameter = energy\n", "scan.parameter"),
    ("[mystery]\nx = 1\n", "mystery"),
    ("[run]\nseeds = 1\n", "run.seeds"),
    ("[beam2]\nkz_keV = 5\n", "beam2.kz_keV"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


def test_flags_override(run, tmp_path):
    out = tmp_path / "a.txt"
    res = run("asymmetry", "--model", "born-ur", "--alpha", "0.3", "--out", str(out),
              config="[asymmetry]\nn_radial = 16\nn_azimuthal = 32\n[model]\nname = coulomb-ur\nalpha = 5\n")
    assert res.exit_code == 0
    assert "model=born-ur" in res.output
    meta = json.loads(out.with_suffix(".meta").read_text())
    assert meta["config"]["model"] == "born-ur"


def test_run_config_round_trips_through_dict():
    d = RunConfig().as_dict()
    assert d["beam1"]["E_MeV"] == 2.1 and "extra" not in d


# -- commands ---------------------------------------------------------------


def test_fringe_map_csv_and_sidecar(run, tmp_path):
    out = tmp_path / "map.csv"
    res = run("fringe-map", "--out", str(out), config="[grid]\nn = 20\n")
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "Kx_keV,Ky_keV,dsigma_arb"
    assert len(lines) == 401
    x, y, v = lines[1].split(",")
    assert float(x) == -342.0 and float(y) == -342.0
    meta = json.loads(out.with_suffix(".meta").read_text())
    assert meta["command"] == "fringe-map" and "version" in meta
    assert meta["map"]["edge_flags"] >= 0
    # re-running is byte-identical
    first = out.read_bytes()
    run("fringe-map", "--out", str(out), config="[grid]\nn = 20\n")
    assert out.read_bytes() == first


def test_fringe_map_off_annulus_warns(run, tmp_path):
    out = tmp_path / "far.csv"
    res = run("fringe-map", "--out", str(out),
              config="[grid]\nkx_min_keV = 400\nkx_max_keV = 500\nky_min_keV = 400\nky_max_keV = 500\nn = 4\n")
    assert res.exit_code == 0
    assert all(line.endswith(",0") for line in out.read_text().splitlines()[1:])
    assert "warning" in json.loads(out.with_suffix(".meta").read_text())["map"]


def test_asymmetry_report_is_key_value(run):
    res = run("asymmetry", "--model", "coulomb-ur", "--alpha", "10",
              config="[asymmetry]\nn_radial = 32\nn_azimuthal = 64\n")
    assert res.exit_code == 0
    kv = dict(line.split("=", 1) for line in res.output.strip().splitlines())
    assert float(kv["A_perp"]) > 0
    assert {"error", "model", "k1p_region", "approximation"} <= set(kv)


def test_scan_rows(run, tmp_path):
    out = tmp_path / "scan.csv"
    res = run("scan", "--out", str(out), config=(
        "[model]\nname = coulomb-ur\nalpha = 0.01\n[asymmetry]\nn_radial = 16\nn_azimuthal = 32\n"
        "[scan]\nparameter = two_m2\nstart = 1\nstop = 5\nsteps = 3\n"))
    assert res.exit_code == 0, res.output
    rows = out.read_text().splitlines()
    assert rows[0] == "two_m2,A_perp,error" and len(rows) == 4


def test_generate_then_reconstruct(run, tmp_path):
    ev = tmp_path / "ev.jsonl"
    cfg = ("[model]\nname = coulomb-ur\nalpha = 10\n[run]\nn_events = 3000\nseed = 2\n"
           "[grid]\nn = 30\n[reconstruct]\nslices_keV = 0, 400, 600\n")
    res = run("generate", "--out", str(ev), config=cfg)
    assert res.exit_code == 0, res.output
    records = [json.loads(line) for line in ev.read_text().splitlines()]
    assert len(records) == 3000
    assert set(records[0]) == {"k1p", "k2p", "weight", "stream", "counter"}
    out = tmp_path / "rec.csv"
    res = run("reconstruct", str(ev), "--out", str(out), config=cfg)
    assert res.exit_code == 0, res.output
    assert "slice0" in res.output and "flagged=empty" in res.output
    assert "A_perp_hat=" in res.output
    assert out.read_text().startswith("slice,Kx_keV,Ky_keV,count\n")


def test_generate_n_events_flag(run, tmp_path):
    ev = tmp_path / "ev.jsonl"
    res = run("generate", "--n-events", "10", "--seed", "3", "--out", str(ev))
    assert res.exit_code == 0
    assert len(ev.read_text().splitlines()) == 10


def test_validate_passes_and_detects_fault(run):
    res = run("validate")
    assert res.exit_code == 0, res.output
    assert res.output.count("PASS") == 5
    bad = CliRunner().invoke(main, ["validate", "--inject-fault", "config-sign"])
    assert bad.exit_code == 2
    assert "FAIL Born mirror symmetry" in bad.output


def test_exit_codes(run, tmp_path):
    assert run("asymmetry", "--model", "coulomb-ur").exit_code == 1
    assert run("asymmetry", config="[grid]\nn = -1\n").exit_code == 1
    assert CliRunner().invoke(main, ["asymmetry", "--config", str(tmp_path / "missing.ini")]).exit_code == 1
    assert run("fringe-map", "--out", str(tmp_path / "no" / "dir" / "x.csv"),
               config="[grid]\nn = 4\n").exit_code == 3
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json\n")
    assert run("reconstruct", str(bad)).exit_code == 1
    # numerical failure: k1' too large for the available energy
    assert run("generate", "--n-events", "5", config="[final]\nk1p_keV = 5000\n").exit_code == 2
