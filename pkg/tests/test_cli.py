"""Command line exit codes and argument handling."""
import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "xrflow.cli"]


def run_cli(*args, timeout=60):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          timeout=timeout)


def test_help_lists_commands():
    proc = run_cli("--help")
    assert proc.returncode == 0
    for command in ("serve", "run", "seed-demos", "sim-device", "run-scenario"):
        assert command in proc.stdout


def test_run_unknown_workspace_is_an_infra_error(tmp_path):
    proc = run_cli("run", "--workspace", "nope", "--headless",
                   "--data-root", str(tmp_path))
    assert proc.returncode == 2
    assert "nope" in proc.stderr


def test_sim_device_unreachable_server(tmp_path):
    scenario = tmp_path / "sc.json"
    scenario.write_text('{"name": "x", "duration": 0.2}')
    proc = run_cli("sim-device", "--server", "http://127.0.0.1:9",
                   "--scenario", str(scenario))
    assert proc.returncode == 2


def test_sim_device_missing_scenario_file(tmp_path):
    proc = run_cli("sim-device", "--server", "http://127.0.0.1:9",
                   "--scenario", str(tmp_path / "absent.json"))
    assert proc.returncode == 2
    assert "absent.json" in proc.stderr


def test_unknown_flag_fails_fast():
    proc = run_cli("run", "--workspce", "demo1")
    assert proc.returncode == 2
    assert "workspce" in proc.stderr


def test_seed_demos_populates_and_is_idempotent(tmp_path):
    root = tmp_path / "data"
    first = run_cli("seed-demos", "--data-root", str(root))
    assert first.returncode == 0
    codes = sorted(p.stem for p in (root / "workspaces").glob("*.json"))
    assert codes == ["demo1", "demo2", "demo3", "demo4"]
    second = run_cli("seed-demos", "--data-root", str(root))
    assert second.returncode == 0
