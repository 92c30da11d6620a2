"""Operator commands: serve, seed-demos, run, sim-device, run-scenario.

Exit codes are a stable contract: 0 success, 1 expectation or execution
failure, 2 configuration error (bad address, missing workspace, unreadable
scenario).
"""
from __future__ import annotations

import json
import logging
import sys
import time
from pathlib import Path

import click
import requests

from .errors import FlowError, ServerUnreachable, UnknownWorkspace
from .gateway import GatewayServer, GatewayState
from .sim import Scenario, SimDevice

log = logging.getLogger(__name__)

DEFAULT_DATA_ROOT = "./xrflow-data"
SYNC_TIMEOUT = 10.0   # wall seconds to wait for stream ingestion per tick


def _setup_logging():
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@click.group()
def main():
    """Workflow gateway and device tooling."""


# ------------------------------------------------------------------- serve

@main.command()
@click.option("--addr", default="127.0.0.1:8800", show_default=True,
              help="host:port to bind; port 0 picks a free port.")
@click.option("--data-root", default=DEFAULT_DATA_ROOT, show_default=True,
              type=click.Path(), help="Directory for stored data.")
@click.option("--poll-log", default=None, type=click.Path(),
              help="Append one JSON line per device poll to this file.")
@click.option("--webui", default=None, type=click.Path(),
              help="Directory with the built web UI; served at /.")
def serve(addr, data_root, poll_log, webui):
    """Run the gateway until interrupted."""
    _setup_logging()
    try:
        host, _, port = addr.partition(":")
        server = GatewayServer(data_root, host=host or "127.0.0.1",
                               port=int(port or 0), poll_log=poll_log,
                               webui_dir=webui)
        server.start()
    except (OSError, ValueError, PermissionError) as e:
        click.echo(f"cannot start gateway: {e}", err=True)
        sys.exit(2)
    click.echo(f"gateway listening on {server.address} "
               f"(streams on tcp port {server.state.hub.port})")
    try:
        while True:
            time.sleep(0.5)
    except KeyboardInterrupt:
        click.echo("shutting down")
    finally:
        server.stop()


# -------------------------------------------------------------- seed-demos

@main.command("seed-demos")
@click.option("--data-root", default=DEFAULT_DATA_ROOT, show_default=True,
              type=click.Path())
def seed_demos_cmd(data_root):
    """Install the demo1..demo4 fixture workspaces and their data."""
    from .demos import seed_demos
    try:
        codes = seed_demos(data_root)
    except (OSError, PermissionError) as e:
        click.echo(f"cannot seed demos: {e}", err=True)
        sys.exit(2)
    click.echo(f"seeded workspaces: {', '.join(codes)}")


# ------------------------------------------------------------ orchestrator

def _sync_ingest(state: GatewayState, devices) -> None:
    """Block until the hub has processed every frame the devices sent."""
    deadline = time.monotonic() + SYNC_TIMEOUT
    while True:
        behind = False
        for dev in devices:
            if dev.device_key is None:
                continue
            for kind, sent in dev.sent_count.items():
                seen = (state.hub.received_count(dev.device_key, kind)
                        + state.hub.rejected_count(dev.device_key, kind))
                if seen < sent:
                    behind = True
        if not behind:
            return
        if time.monotonic() > deadline:
            raise RuntimeError("stream ingestion did not catch up")
        time.sleep(0.002)


def orchestrate(data_root, code: str, scenario_paths, seed: int = 0,
                log_dir=None) -> dict:
    """Gateway + one sim device per scenario, advanced in lock step.

    The simulated clock stamps frames and logs; HTTP and TCP are real. With a
    fixed seed the device keys, task ids, and event logs replay identically.
    """
    scenarios = [Scenario.load(p) for p in scenario_paths]
    server = GatewayServer(data_root, seed=seed).start()
    state = server.state
    clock = {"t": 0.0}
    devices = []
    action_failures: list = []
    reports: list = []
    try:
        state.workspaces.load(code)  # UnknownWorkspace before any device work
        for i, sc in enumerate(scenarios):
            devices.append(SimDevice(server.address, sc, name=f"dev{i + 1}",
                                     auto_connect=True, wall_times=False,
                                     clock=lambda: clock["t"]))
        for dev in devices:
            dev.start()

        actions = []
        for i, (dev, sc) in enumerate(zip(devices, scenarios)):
            if sc.connector:
                creds = {"username": dev.credentials["username"],
                         "password": dev.credentials["password"]}
                actions.append((0.1 + 0.05 * i, 0, {
                    "action": "execute_node", "node": sc.connector,
                    "params": creds}))
            for j, raw in enumerate(sc.server_script):
                actions.append((float(raw["t"]), 100 + j, dict(raw)))
        actions.sort(key=lambda a: (a[0], a[1]))

        http = requests.Session()
        duration = max(sc.duration for sc in scenarios)
        dt = max(min(sc.poll_interval for sc in scenarios) / 2.0, 0.01)
        idx = 0
        t = 0.0
        while t <= duration + 1e-9:
            clock["t"] = t
            for dev in devices:
                dev.advance(t)
            _sync_ingest(state, devices)
            while idx < len(actions) and actions[idx][0] <= t + 1e-9:
                raw = actions[idx][2]
                idx += 1
                if raw["action"] != "execute_node":
                    action_failures.append({"action": raw,
                                            "error": "unknown server action"})
                    continue
                url = (f"{server.address}/api/workspace/{code}"
                       f"/node/{raw['node']}/execute")
                r = http.post(url, json={"params": raw.get("params")},
                              timeout=30)
                if r.status_code >= 400:
                    action_failures.append({"action": {k: v for k, v in raw.items()
                                                       if k != "params"},
                                            "error": f"HTTP {r.status_code}: {r.text}"})
                else:
                    reports.append(r.json()["report"])
            t = round(t + dt, 9)
        clock["t"] = duration
        for dev in devices:
            dev.drain()
    finally:
        for dev in devices:
            dev.close()
        server.stop()

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        for dev, sc in zip(devices, scenarios):
            dev.write_log(log_dir / f"{sc.name}.jsonl")

    final = reports[-1] if reports else None
    expect_failures = [
        {"device": dev.name, **failure}
        for dev in devices for failure in dev.expect_failures
    ]
    ok = (not expect_failures and not action_failures
          and final is not None and not final["errors"])
    return {
        "ok": ok,
        "workspace": code,
        "devices": [{"name": dev.name,
                     "placed_specs": sorted(dev.scene.placed),
                     "deferred": sorted(dev.scene.deferred),
                     "failed_tasks": dev.scene.failed_tasks,
                     "log_events": len(dev.log)} for dev in devices],
        "scenes": {dev.name: dev.scene.snapshot() for dev in devices},
        "final_report": final,
        "expect_failures": expect_failures,
        "action_failures": action_failures,
    }


# --------------------------------------------------------------------- run

@main.command()
@click.option("--workspace", "code", required=True, help="Access code.")
@click.option("--headless", is_flag=True,
              help="Drive bundled device scenarios instead of real hardware.")
@click.option("--data-root", default=DEFAULT_DATA_ROOT, show_default=True,
              type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
def run(code, headless, data_root, seed):
    """Execute a workspace once and print the report."""
    root = Path(data_root)
    scenario_files = sorted((root / "scenarios").glob(f"{code}*.json"))
    try:
        if headless and scenario_files:
            result = orchestrate(root, code, scenario_files, seed=seed)
            click.echo(json.dumps(result, indent=2, default=str))
            sys.exit(0 if result["ok"] else 1)
        state = GatewayState(root)
        live = state.live_workspace(code)
        report, outputs = live.execute_all()
        click.echo(json.dumps({"report": report.to_jsonable(),
                               "outputs": outputs}, indent=2))
        sys.exit(0 if report.ok() else 1)
    except UnknownWorkspace as e:
        click.echo(f"unknown workspace: {e}", err=True)
        sys.exit(2)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        click.echo(f"cannot run workspace: {e}", err=True)
        sys.exit(2)


# -------------------------------------------------------------- sim-device

@main.command("sim-device")
@click.option("--server", required=True, help="Gateway base URL.")
@click.option("--scenario", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", default=None, type=click.Path(),
              help="Write the JSON-lines event log here.")
def sim_device(server, scenario, log_path):
    """Run one simulated device against a live gateway, in real time."""
    _setup_logging()
    try:
        sc = Scenario.load(scenario)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        click.echo(f"cannot load scenario: {e}", err=True)
        sys.exit(2)
    dev = SimDevice(server, sc, name=sc.name)
    try:
        dev.run_realtime()
    except (ServerUnreachable, FlowError) as e:
        click.echo(f"device run failed: {e}", err=True)
        if log_path:
            dev.write_log(log_path)
        sys.exit(2)
    finally:
        dev.close()
    if log_path:
        dev.write_log(log_path)
    click.echo(json.dumps({"placed_specs": sorted(dev.scene.placed),
                           "expect_failures": dev.expect_failures},
                          indent=2))
    sys.exit(1 if dev.expect_failures else 0)


# ------------------------------------------------------------ run-scenario

@main.command("run-scenario")
@click.option("--workspace", "code", required=True)
@click.option("--scenario", "scenario_paths", multiple=True, required=True,
              type=click.Path(exists=True),
              help="One per simulated device; repeatable.")
@click.option("--data-root", default=DEFAULT_DATA_ROOT, show_default=True,
              type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--log-dir", default=None, type=click.Path())
def run_scenario(code, scenario_paths, data_root, seed, log_dir):
    """Gateway plus simulated devices, lock-stepped through scenarios."""
    try:
        result = orchestrate(data_root, code, scenario_paths, seed=seed,
                             log_dir=log_dir)
    except UnknownWorkspace as e:
        click.echo(f"unknown workspace: {e}", err=True)
        sys.exit(2)
    except (OSError, ValueError, json.JSONDecodeError) as e:
        click.echo(f"cannot run scenario: {e}", err=True)
        sys.exit(2)
    click.echo(json.dumps(result, indent=2, default=str))
    if not result["ok"]:
        first = (result["expect_failures"] or result["action_failures"]
                 or [{"error": "workflow report has errors"}])[0]
        click.echo(f"failed: {json.dumps(first, default=str)}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
