import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from subradiant import ModelParams, build_generator, entropy_rates, observables, steady_state
from subradiant.cli import main


def run(tmp_path, *args):
    return main([*args, "--out-dir", str(tmp_path)])


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_steady_outputs(tmp_path):
    assert run(tmp_path, "steady", "--N", "100", "--w", "0.05", "--gamma", "0.1") == 0
    data = rows(tmp_path / "steady_distribution.csv")
    assert list(data[0]) == ["J", "M", "P"]
    boundary = sum(float(r["P"]) for r in data if int(r["M"]) == -int(r["J"]))
    assert boundary > 0.99
    obs = json.loads((tmp_path / "steady_observables.json").read_text())
    for key in ("intensity", "inversion", "mean_J", "mean_M", "boundary_mass", "N", "w", "gamma"):
        assert key in obs
    manifest = json.loads((tmp_path / "steady_manifest.json").read_text())
    assert manifest["format_version"] and manifest["config"]["N"] == 100
    assert manifest["outputs"] == ["steady_distribution.csv", "steady_observables.json"]


def test_apex_phase_cli(tmp_path):
    assert run(tmp_path, "steady", "--N", "100", "--w", "0.2") == 0
    obs = json.loads((tmp_path / "steady_observables.json").read_text())
    assert obs["boundary_mass"] < 0.5 and obs["mean_J"] < 10


def test_odd_n_is_usage_error(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(SystemExit) as exc:
        main(["steady", "--N", "101", "--w", "0.1", "--out-dir", str(out)])
    assert exc.value.code == 2
    assert not out.exists()


def test_solver_failure_exit_code(tmp_path):
    assert run(tmp_path, "steady", "--N", "10", "--w", "0", "--gamma", "0") == 1
    assert not (tmp_path / "steady_distribution.csv").exists()


def test_sweep_deterministic_across_workers(tmp_path):
    args = ["sweep", "--N", "20", "10", "--w-range", "0.05", "0.2", "0.05", "--gamma", "0.1"]
    assert main([*args, "--workers", "1", "--out-dir", str(tmp_path / "a")]) == 0
    assert main([*args, "--workers", "3", "--out-dir", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes()
    data = rows(tmp_path / "a" / "sweep.csv")
    assert [(int(r["N"]), float(r["w"])) for r in data] == sorted(
        (N, w) for N in (10, 20) for w in (0.05, 0.1, 0.15, 0.2)
    )
    for key in ("s_i_per_atom", "intensity", "inversion", "boundary_mass", "error"):
        assert key in data[0]


def test_sweep_point_matches_direct(tmp_path):
    assert run(tmp_path, "sweep", "--N", "40", "--w", "0.2", "--workers", "1") == 0
    (row,) = rows(tmp_path / "sweep.csv")
    gen = build_generator(ModelParams(40, 0.2, 0.1))
    dist = steady_state(gen)
    assert float(row["s_i_per_atom"]) == entropy_rates(gen, dist).s_i_per_atom
    assert float(row["intensity"]) == observables(dist).intensity
    assert row["error"] == ""


def test_sweep_records_row_errors(tmp_path):
    assert run(tmp_path, "sweep", "--N", "10", "--w", "0", "0.1", "--gamma", "0", "--workers", "1") == 0
    data = rows(tmp_path / "sweep.csv")
    assert data[0]["error"].startswith("SingularOrNonUnique")
    assert data[1]["error"].startswith("DivergentEntropy")


def test_sweep_env_workers(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBRADIANT_WORKERS", "2")
    assert run(tmp_path, "sweep", "--N", "10", "--w", "0.1", "0.2") == 0
    manifest = json.loads((tmp_path / "sweep_manifest.json").read_text())
    assert manifest["config"]["workers"] == 2


def test_currents_outputs(tmp_path):
    assert run(tmp_path, "currents", "--N", "20", "--w", "0.2") == 0
    data = rows(tmp_path / "currents.csv")
    assert list(data[0]) == ["J_from", "M_from", "J_to", "M_to", "W"]
    ent = json.loads((tmp_path / "entropy.json").read_text())
    for key in ("s_tot", "s_e", "s_i", "s_i_per_atom", "n_edges_skipped", "N", "w", "gamma"):
        assert key in ent
    assert ent["s_i"] > 0


def test_g2_outputs(tmp_path):
    assert run(tmp_path, "g2", "--N", "20", "--w", "0.2", "--tau-max", "10", "--points", "11") == 0
    data = rows(tmp_path / "g2.csv")
    assert list(data[0]) == ["tau", "g2"] and len(data) == 11
    assert float(data[0]["tau"]) == 0 and float(data[0]["g2"]) > 1


def test_traj_byte_identical(tmp_path):
    args = ["traj", "--N", "200", "--w", "0.2", "--t-max", "60", "--seed", "7", "--filter", "collective", "--burn-in", "40"]
    assert main([*args, "--out-dir", str(tmp_path / "a")]) == 0
    assert main([*args, "--out-dir", str(tmp_path / "b")]) == 0
    for name in ("events.csv", "burst_stats.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    data = rows(tmp_path / "a" / "events.csv")
    assert list(data[0]) == ["t", "channel", "J_from", "M_from", "J_to", "M_to"]
    assert {r["channel"] for r in data} == {"collective_decay"}
    assert min(float(r["t"]) for r in data) >= 40


def test_config_file_with_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# steady run\nN = 20\nw = 0.05\ngamma = 0.2\n")
    assert run(tmp_path, "steady", "--config", str(cfg), "--w", "0.1") == 0
    obs = json.loads((tmp_path / "steady_observables.json").read_text())
    assert (obs["N"], obs["w"], obs["gamma"]) == (20, 0.1, 0.2)


def test_analytic_ratios(tmp_path, capsys):
    assert run(tmp_path, "analytic", "ratios", "--J", "4") == 0
    assert capsys.readouterr().out.strip() == "9/196"
    assert json.loads((tmp_path / "analytic_ratios.json").read_text())["ratios"]["4"]["fraction"] == "9/196"


@pytest.mark.parametrize("which,args", [("small-w", []), ("gaussian", ["--N", "400", "--w", "0.05"]), ("boundary", ["--N", "40", "--w", "0.05"])])
def test_analytic_others(tmp_path, which, args):
    assert run(tmp_path, "analytic", which, *args) == 0
    data = json.loads((tmp_path / f"analytic_{which}.json").read_text())
    if which == "small-w":
        assert data["P0"]["fraction"] == "6/29"
    elif which == "gaussian":
        assert data["mu"] == pytest.approx(200 / 3)
    else:
        assert np.isclose(sum(data["P_J"]), 1)


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "subradiant", "analytic", "ratios", "--J", "2", "--out-dir", str(tmp_path)],
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "5/18"
