import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lnslab import cli
from lnslab.grid import Grid, VectorField3, read_snapshot, write_snapshot
from lnslab.landau import inject_fault


def write_toml(path, text):
    path.write_text(text)
    return path


def test_load_config_merges(tmp_path):
    p = write_toml(tmp_path / "c.toml", 'scenario = "simulate"\n[grid]\nn = 16\n')
    cfg = cli.load_config("simulate", p, seed=7)
    assert cfg["grid"] == {"n": 16, "L": 8.0}
    assert cfg["seed"] == 7
    assert cfg["thresholds"]["eps1"] == cli.CALIBRATED_EPS1


def test_load_config_errors(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.load_config("nonsense")
    with pytest.raises(cli.ConfigError):
        cli.load_config("simulate", tmp_path / "missing.toml")
    p = write_toml(tmp_path / "c.toml", 'scenario = "stability"\n')
    with pytest.raises(cli.ConfigError):
        cli.load_config("simulate", p)
    bad = write_toml(tmp_path / "bad.toml", "[grid\n")
    with pytest.raises(cli.ConfigError):
        cli.load_config("simulate", bad)


def test_builders_validate():
    with pytest.raises(cli.ConfigError):
        cli.make_grid({"grid": {"n": 12, "L": 1.0}})
    with pytest.raises(cli.ConfigError):
        cli.make_grid({})
    g = Grid(16, 8.0)
    with pytest.raises(cli.ConfigError):
        cli.make_background({"background": {"kind": "vortex"}}, g)
    with pytest.raises(cli.ConfigError):
        cli.make_data({"data": {"kind": "vortex"}}, g)
    with pytest.raises(cli.ConfigError):
        cli.make_solver_config({"solver": {"dt": 1.0}})


def test_random_data_is_seeded_and_solenoidal():
    from lnslab.spectral import divergence_modes, forward

    g = Grid(16, 8.0)
    a, _ = cli.make_data({"data": {"kind": "random", "amplitude": 0.1}, "seed": 3}, g)
    b, _ = cli.make_data({"data": {"kind": "random", "amplitude": 0.1}, "seed": 3}, g)
    assert np.array_equal(a.data, b.data)
    assert np.max(a.magnitude()) == pytest.approx(0.1)
    assert np.max(np.abs(divergence_modes(forward(a)))) < 1e-10


def test_smallness_gate_modes():
    g = Grid(16, 8.0)
    u0 = VectorField3(g, np.ones((3,) + g.shape))
    n0 = 3 ** 0.5 * 8.0  # weak-L3 norm of a constant of size sqrt(3) on |box| = 512
    half = cli.smallness_gate({"thresholds": {"eps1": 1, "eps2": 1.5 * n0}}, None, u0, math.inf)
    full = cli.smallness_gate({"thresholds": {"eps1": 1, "eps2": 1.5 * n0, "gate": "full"}},
                              None, u0, math.inf)
    assert half["u0_norm"] == pytest.approx(n0)
    assert not half["passed"] and full["passed"]
    with pytest.raises(cli.ConfigError):
        cli.smallness_gate({"thresholds": {"gate": "quarter"}}, None, u0, 3.0)


def test_dumps_is_stable():
    s = cli.dumps({"b": np.float64(1.5), "a": [np.int64(2), math.inf], "c": np.bool_(True)})
    assert json.loads(s) == {"a": [2, None], "b": 1.5, "c": True}
    assert s.index('"a"') < s.index('"b"')


def test_simulate_exit_and_outputs(tmp_path):
    cfg = write_toml(tmp_path / "c.toml", "[grid]\nn = 16\n[solver]\nt_end = 0.2\n"
                                          "[output]\nsnapshots = true\n")
    out = tmp_path / "out"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == cli.EXIT_PASS
    rep = json.loads((out / "simulate_report.json").read_text())
    assert rep["passed"] and rep["solver"]["steps"] == 4
    snaps = sorted(out.glob("snap_*.lnsf"))
    assert len(snaps) == 2
    assert read_snapshot(snaps[-1]).grid == Grid(16, 8.0)
    assert (out / "series.csv").read_text().startswith("t,L2")


def test_snapshot_datum(tmp_path):
    g = Grid(16, 8.0)
    u, _ = cli.make_data({"data": {"kind": "smooth"}}, g)
    write_snapshot(u, tmp_path / "u.lnsf")
    cfg = {"data": {"kind": "snapshot", "path": str(tmp_path / "u.lnsf")}}
    v, _ = cli.make_data(cfg, g)
    assert np.array_equal(u.data, v.data)
    with pytest.raises(cli.ConfigError):
        cli.make_data(cfg, Grid(32, 8.0))


def test_refusal_exit_code(tmp_path, capsys):
    cfg = write_toml(tmp_path / "c.toml", "[grid]\nn = 16\nL = 4.0\n[data]\namplitude = 50.0\n"
                                          "[solver]\nt_end = 0.1\n")
    assert cli.main(["stability", "--config", str(cfg)]) == cli.EXIT_REFUSE
    err = capsys.readouterr().err
    assert "refused" in err and "smallness" in err


def test_bad_grid_is_refusal(tmp_path):
    cfg = write_toml(tmp_path / "c.toml", "[grid]\nn = 24\n")
    assert cli.main(["simulate", "--config", str(cfg)]) == cli.EXIT_REFUSE


def test_counterexample_unresolved_is_refusal(tmp_path):
    cfg = write_toml(tmp_path / "c.toml", "[grid]\nn = 16\nL = 8.0\n")
    assert cli.main(["counterexample", "--config", str(cfg)]) == cli.EXIT_REFUSE


def test_zero_datum_degenerate(tmp_path):
    cfg = write_toml(tmp_path / "c.toml", "[grid]\nn = 16\nL = 4.0\n[data]\nkind = \"zero\"\n"
                                          "[solver]\nt_end = 0.1\n")
    assert cli.main(["stability", "--config", str(cfg)]) == cli.EXIT_PASS
    cfg2 = write_toml(tmp_path / "c2.toml", "[grid]\nn = 16\n[data]\nkind = \"zero\"\n")
    assert cli.main(["counterexample", "--config", str(cfg2)]) == cli.EXIT_PASS


def test_norms_and_dss_gen(tmp_path):
    assert cli.main(["norms", "--out", str(tmp_path / "n")]) == cli.EXIT_PASS
    reps = json.loads((tmp_path / "n" / "norms.json").read_text())["reports"]
    assert [r["q"] for r in reps] == [3.0, 4.0, None, 2.0]
    assert cli.main(["dss-gen", "--out", str(tmp_path / "d")]) == cli.EXIT_PASS
    assert (tmp_path / "d" / "dss_datum.lnsf").exists()
    ann = json.loads((tmp_path / "d" / "annulus.json").read_text())
    assert all(it["holds"] for it in ann)


def test_fixedpoint_suite_small():
    fp = cli.fixedpoint_suite(0, instances=5)
    assert fp["scalar_error"] <= 1e-12
    assert fp["max_ratio"] <= 7 / 8 + 1e-9
    assert fp["max_uniqueness_gap"] <= 1e-10


@pytest.fixture(scope="module")
def verify_pair(tmp_path_factory):
    a = tmp_path_factory.mktemp("va")
    b = tmp_path_factory.mktemp("vb")
    codes = (cli.main(["verify", "--out", str(a), "--seed", "5"]),
             cli.main(["verify", "--out", str(b), "--seed", "5"]))
    return codes, a / "verify_report.json", b / "verify_report.json"


@pytest.mark.slow
def test_verify_passes_and_is_deterministic(verify_pair):
    codes, a, b = verify_pair
    assert codes == (cli.EXIT_PASS, cli.EXIT_PASS)
    assert a.read_bytes() == b.read_bytes()
    items = json.loads(a.read_text())["items"]
    assert {it["module"] for it in items} == {"lorentz", "spectral", "landau", "fixedpoint",
                                              "dss", "mild_solver"}


@pytest.mark.slow
def test_verify_flags_injected_fault(tmp_path):
    with inject_fault():
        code = cli.main(["verify", "--out", str(tmp_path)])
    assert code == cli.EXIT_FAIL
    items = json.loads((tmp_path / "verify_report.json").read_text())["items"]
    failed = {it["name"] for it in items if not it["passed"]}
    assert failed and all(it["module"] == "landau" for it in items if not it["passed"])
    assert "residual_order" in failed
    assert all(it["passed"] for it in items if it["module"] != "landau")


def test_console_script_help():
    out = subprocess.run([sys.executable, "-m", "lnslab.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    assert "verify" in out.stdout


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        cli.main(["explode"])
    assert exc.value.code == 2
