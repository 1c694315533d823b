import json
import os
import stat
import subprocess
import sys

import pytest

from geobridge import cli, scenarios


def run(*argv):
    return cli.main(list(argv))


def test_list_shows_every_scenario(capsys):
    assert run("list") == 0
    out = capsys.readouterr().out
    assert len(scenarios.SCENARIOS) >= 8
    for name, sc in scenarios.SCENARIOS.items():
        assert name in out
        assert sc.anchor in out


def test_run_writes_schema(tmp_path, monkeypatch):
    monkeypatch.delenv("GEOBRIDGE_OUT", raising=False)
    assert run("run", "uniform-sinkhorn", "--out", str(tmp_path), "--set", 'outputs=["report","frames"]') == 0
    data = json.loads((tmp_path / "uniform-sinkhorn.json").read_text())
    assert set(data) == {"scenario", "config_echo", "results", "checks", "timings"}
    assert data["config_echo"]["seed"] == 0
    for c in data["checks"]:
        assert set(c) >= {"name", "value", "tolerance", "pass"}
        assert c["pass"] is True
    frames = (tmp_path / "uniform-sinkhorn_frames.csv").read_text().splitlines()
    assert frames[0].startswith("t,rho_0")
    assert len(frames) == 12
    mode = stat.S_IMODE(os.stat(tmp_path / "uniform-sinkhorn.json").st_mode)
    assert mode == 0o644
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


def test_quadratic_bridge_report(tmp_path):
    assert run("run", "quadratic-bridge", "--out", str(tmp_path)) == 0
    data = json.loads((tmp_path / "quadratic-bridge.json").read_text())
    assert abs(data["results"]["phi0"][0] - 1.388800) <= 1e-6
    gap = {c["name"]: c for c in data["checks"]}["action_identity_gap"]
    assert gap["value"] <= 1e-5 and gap["pass"]


def test_sphere_expected_failures(tmp_path):
    assert run("run", "sphere-assumption-check", "--out", str(tmp_path)) == 0
    data = json.loads((tmp_path / "sphere-assumption-check.json").read_text())
    assert data["results"]["metric_ok"] is False
    flagged = [c for c in data["checks"] if c.get("expected") == "fail"]
    assert flagged and all(not c["pass"] for c in flagged)


def test_env_overrides_out(tmp_path, monkeypatch):
    env_dir = tmp_path / "env"
    monkeypatch.setenv("GEOBRIDGE_OUT", str(env_dir))
    assert run("run", "uniform-sinkhorn", "--out", str(tmp_path / "flag")) == 0
    assert (env_dir / "uniform-sinkhorn.json").exists()
    assert not (tmp_path / "flag").exists()


def test_check_writes_nothing(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("GEOBRIDGE_OUT", raising=False)
    assert run("check", "uniform-sinkhorn") == 0
    assert list(tmp_path.iterdir()) == []


def test_config_file_and_sets(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("n_cells = 32\n[uniform-sinkhorn]\ngamma = 0.1\n")
    assert run("run", "uniform-sinkhorn", "--config", str(cfg), "--out", str(tmp_path),
               "--set", "tol=1e-11") == 0
    echo = json.loads((tmp_path / "uniform-sinkhorn.json").read_text())["config_echo"]
    assert echo["n_cells"] == 32 and echo["gamma"] == 0.1 and echo["tol"] == 1e-11


@pytest.mark.parametrize("argv", [
    ["run", "nope"],
    ["run", "uniform-sinkhorn", "--set", "bogus=1"],
    ["run", "uniform-sinkhorn", "--set", "n_cells=\"x\""],
    ["run", "uniform-sinkhorn", "--set", "n_cells=48"],
    ["run", "uniform-sinkhorn", "--set", "novalue"],
    ["run", "uniform-sinkhorn", "--config", "/nonexistent.toml"],
    ["run-all", "--set", "gamma=0.1"],
    ["run-all", "--workers", "0"],
    ["frobnicate"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert run(*argv, *(["--out", str(tmp_path)] if argv[0] != "frobnicate" else [])) == 2


def test_bad_toml_exit_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("n_cells = = 3\n")
    assert run("run", "uniform-sinkhorn", "--config", str(cfg), "--out", str(tmp_path)) == 2


def test_nonconvergence_exit_3(tmp_path):
    assert run("run", "gaussian-sinkhorn", "--out", str(tmp_path), "--set", "max_iter=1",
               "--set", "refinement=false") == 3
    assert not (tmp_path / "gaussian-sinkhorn.json").exists()


def test_domain_error_exit_4(tmp_path):
    assert run("run", "cone-entropy-bridge", "--out", str(tmp_path), "--set", "y=[-1.0]") == 4


def test_unreachable_tolerance_exit_3(tmp_path):
    assert run("run", "uniform-sinkhorn", "--out", str(tmp_path), "--set", "tol=1e-20",
               "--set", "max_iter=3") == 3


def test_failing_check_exit_1(tmp_path):
    assert run("run", "porous-medium", "--out", str(tmp_path), "--set", "entropic_tol=1e-9",
               "--set", "compare_entropic=true", "--set", "N_time=4", "--set", "n_cells=16",
               "--set", "gradient_checks=1") == 1


def test_float_formatting():
    text = cli.dumps({"x": 1.0 / 3.0, "y": float("nan"), "z": float("inf"), "n": [2 ** 0.5]})
    data = json.loads(text)
    assert data["x"] == 0.333333333333
    assert data["y"] is None and data["z"] == "inf"
    assert data["n"] == [1.41421356237]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "geobridge", "list"], capture_output=True, text=True)
    assert out.returncode == 0 and "quadratic-bridge" in out.stdout
