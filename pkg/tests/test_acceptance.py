"""Acceptance suite: one test per shipping criterion.

Each test exercises a public surface end to end and asserts the numbers the
release gate cares about. Tolerances live next to their assertions.
"""
import json
import socket
import subprocess
import sys
import threading
import time

import numpy as np
import pytest

from xrflow.gateway.service import GatewayServer
from xrflow.gateway.sessions import SessionManager
from xrflow.gateway.workspaces import WorkspaceStore
from xrflow.geometry import Pose, Similarity
from xrflow.grammar import (
    Link,
    build_spec,
    parse_spec,
    resolve_link,
    serialize_spec,
)
from xrflow.graph import ExecutionContext, Workflow
from xrflow.nodes import build_default_registry
from xrflow.nodes.curvature import compute_curvature
from xrflow.nodes.isosurface import iso_surface
from xrflow.nodes.registration import register_icp
from xrflow.registry import NodeSpec, ParamSpec, Registry, port
from xrflow.sim import Scenario, SimDevice
from xrflow.streams import encode_frame, pose_payload
from xrflow.synthetic import icosphere, sphere_sdf_volume
from xrflow.values import DataKind, DataValue, Table

from conftest import fresh_copy
from oracles import (
    bfs_closure,
    euler_characteristic,
    is_closed_mesh,
    max_radial_error,
    random_rotation,
    rotation_angle,
    world_point_of_domain_value,
)


def table_spec_payload(store, spec_id, rows=6):
    table = Table.from_records(
        [{"x": float(i), "f": float(i * 2)} for i in range(rows)])
    spec = build_spec(DataValue.table(table), "point",
                      {"x": "x", "y": "f"}, "view",
                      Similarity.identity(), store, spec_id)
    return serialize_spec(spec)


# ---------------------------------------------------------------------- c1

def test_c01_device_protocol_conformance(tmp_path):
    """Handshake, scheduler creation, empty poll, delivery: exact sequence,
    spec applied within one poll cycle, all inside five seconds."""
    t_start = time.monotonic()
    server = GatewayServer(tmp_path / "data", port=0, seed=11).start()
    try:
        scenario = Scenario({"name": "protocol", "duration": 1.4,
                             "poll_interval": 0.1})
        dev = SimDevice(server.address, scenario, name="c1dev")
        runner = threading.Thread(target=dev.run_realtime, daemon=True)
        runner.start()

        # wait for the first empty poll, then queue one spec
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline:
            if any(e["event"] == "poll_empty" for e in dev.log):
                break
            time.sleep(0.005)
        else:
            pytest.fail("device never reached an empty poll")
        payload = table_spec_payload(server.state.store, "c1spec")
        server.state.sessions.enqueue_render(dev.device_key, payload)
        runner.join(timeout=10.0)
        assert not runner.is_alive()
    finally:
        dev.close()
        server.stop()

    events = [e["event"] for e in dev.log]
    assert events[:4] == ["request", "credentials", "connect",
                          "scheduler_created"]
    tail = events[4:]
    assert "poll_task" in tail
    cut = tail.index("poll_task")
    assert cut >= 1 and set(tail[:cut]) == {"poll_empty"}
    assert tail[cut:cut + 2] == ["poll_task", "spec_applied"]
    assert set(tail[cut + 2:]) <= {"poll_empty"}

    applied = next(e for e in dev.log if e["event"] == "spec_applied")
    # one 100 ms poll cycle plus processing slack
    assert applied["applied_at"] - applied["enqueued_at"] <= 0.15
    assert dev.scene.placed["c1spec"]["payload"] == payload
    assert time.monotonic() - t_start < 5.0


# ---------------------------------------------------------------------- c2

def _chain_registry():
    reg = Registry()

    def run(ctx, node, inputs):
        parts = [node.id] + [v.payload for v in inputs.values()]
        return {"out": DataValue.text("|".join(parts))}

    reg.register(NodeSpec(
        kind="T", category="Processing/Data",
        inputs=(port("a", DataKind.TEXT, required=False),
                port("b", DataKind.TEXT, required=False)),
        outputs=(port("out", DataKind.TEXT),),
        params=(ParamSpec("tag", "text", default=""),),
        evaluator=run))
    return reg


def test_c02_reactive_reexecution_is_minimal():
    """200 random DAGs: a single invalidation re-runs exactly the dirty
    closure reported by an independent BFS oracle, every time."""
    reg = _chain_registry()
    rng = np.random.default_rng(2024)
    matched = 0
    for case in range(200):
        n = int(rng.integers(2, 65))
        wf = Workflow(reg)
        ids = [wf.add_node("T") for _ in range(n)]
        edges = []
        for i in range(1, n):
            for pname in ("a", "b"):
                if rng.random() < 0.6:
                    j = int(rng.integers(0, i))
                    wf.connect(ids[j], "out", ids[i], pname)
                    edges.append((j, i))
        ctx = ExecutionContext(registry=reg)
        wf.execute(ctx)

        pick = int(rng.integers(0, n))
        wf.set_params(ids[pick], {"tag": f"case{case}"})
        report = wf.execute(ctx)
        expected = {ids[k] for k in bfs_closure(edges, [pick])}
        if set(report.executed) == expected:
            matched += 1
    assert matched == 200


# ---------------------------------------------------------------------- c3

def test_c03_isosurface_sphere_accuracy():
    """64^3 signed-distance sphere: closed genus-0 mesh, radial error within
    1.5 voxel spacings, under two seconds."""
    volume = sphere_sdf_volume(n=64, radius=20.0, spacing=1.0)
    t0 = time.monotonic()
    mesh = iso_surface(volume, 0.0)
    elapsed = time.monotonic() - t0
    assert elapsed < 2.0
    assert is_closed_mesh(mesh.triangles)
    assert euler_characteristic(mesh.vertices, mesh.triangles) == 2
    err = max_radial_error(mesh.vertices, np.zeros(3), 20.0)
    assert err <= 1.5 * 1.0


# ---------------------------------------------------------------------- c4

def test_c04_icp_noise_free_recovery():
    """50 random rigid problems, 1000 points each: pose recovered to 1e-3
    in at least 49, each trial under a second."""
    successes = 0
    for trial in range(50):
        rng = np.random.default_rng(4000 + trial)
        src = rng.uniform(-1.0, 1.0, (1000, 3))
        R = random_rotation(rng, np.deg2rad(30.0))
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        t = direction * rng.uniform(0.0, 0.5)
        dst = src @ R.T + t

        from xrflow.values import PointCloud
        t0 = time.monotonic()
        R_est, t_est, rms = register_icp(PointCloud(points=src),
                                         PointCloud(points=dst))
        assert time.monotonic() - t0 < 1.0
        rot_err = rotation_angle(R_est.T @ R)
        trans_err = float(np.linalg.norm(t_est - t))
        if rot_err < 1e-3 and trans_err < 1e-3:
            successes += 1
    assert successes >= 49


# ---------------------------------------------------------------------- c5

def test_c05_mean_curvature_on_unit_sphere():
    """Subdivision-4 icosphere: discrete mean curvature within 5% of 1.0
    at 95% of vertices."""
    mesh = icosphere(subdivisions=4, radius=1.0)
    out = compute_curvature(mesh)
    h = np.asarray(out.vertex_scalars, dtype=np.float64)
    within = np.abs(h - 1.0) <= 0.05
    assert within.mean() >= 0.95


# ---------------------------------------------------------------------- c6

def test_c06_scheduler_exactly_once():
    """3 producers x 100 tasks against one poller: 300 unique deliveries in
    per-producer order, across 20 repetitions."""
    for rep in range(20):
        mgr = SessionManager(seed=rep)
        cred = mgr.request_connection()
        key = mgr.connect_device(cred["username"], cred["password"])

        def produce(pid):
            for i in range(100):
                mgr.enqueue(key, "RenderSpec", f"{pid}:{i}")

        producers = [threading.Thread(target=produce, args=(p,))
                     for p in range(3)]
        delivered = []

        def consume():
            while len(delivered) < 300:
                task = mgr.poll(key)
                if task.get("status") == "empty":
                    time.sleep(0.0005)
                    continue
                delivered.append(task["payload"])

        poller = threading.Thread(target=consume)
        poller.start()
        for p in producers:
            p.start()
        for p in producers:
            p.join()
        poller.join(timeout=10.0)
        assert not poller.is_alive()

        assert len(delivered) == 300
        assert len(set(delivered)) == 300
        for pid in range(3):
            seq = [int(d.split(":")[1]) for d in delivered
                   if d.startswith(f"{pid}:")]
            assert seq == list(range(100))
        assert mgr.poll(key) == {"status": "empty"}


# ---------------------------------------------------------------------- c7

def test_c07_sensor_streaming_byte_equality(tmp_path):
    """600 frames at a simulated 60 Hz over real TCP arrive byte-identical
    and in order; a capacity-64 queue tabulates exactly the last 64."""
    server = GatewayServer(tmp_path / "data", port=0, seed=7).start()
    try:
        state = server.state
        import requests
        cred = requests.post(server.address + "/api/device/request",
                             timeout=5).json()
        requests.post(server.address + "/api/device/connect",
                      json={"username": cred["username"],
                            "password": cred["password"]}, timeout=5)
        key = cred["device_key"]
        reply = requests.post(server.address + f"/api/device/{key}/stream",
                              json={"kinds": ["HeadPose"]}, timeout=5).json()

        sent = []
        with socket.create_connection((reply["host"], reply["port"]),
                                      timeout=5) as sock:
            for i in range(600):
                ts = (i + 1) / 60.0
                pose = Pose(translation=[float(i), 0.0, 0.0])
                frame = encode_frame(key, "HeadPose", ts, pose_payload(pose))
                sock.sendall(frame)
                sent.append(frame)

            deadline = time.monotonic() + 10.0
            while (state.hub.received_count(key, "HeadPose") < 600
                   and time.monotonic() < deadline):
                time.sleep(0.01)
        assert state.hub.received_count(key, "HeadPose") == 600

        records = state.hub.window(key, "HeadPose", None)
        assert [r.raw for r in records] == sent

        registry = build_default_registry()
        wf = Workflow(registry)
        conn = wf.add_node("XRDeviceConnector",
                           params={"username": cred["username"],
                                   "password": cred["password"]})
        tap = wf.add_node("XRInput", params={"kind": "HeadPose"})
        queue = wf.add_node("DataQueue", params={"capacity": 64})
        wf.connect(conn, "device", tap, "device")
        wf.connect(tap, "stream", queue, "stream")
        ctx = ExecutionContext(registry=registry, store=state.store,
                               gateway=state)
        report = wf.execute(ctx)
        assert report.errors == []
        table = wf.nodes[queue].output_cache["table"].payload
        assert len(table) == 64
        assert table.column("timestamp") == [(i + 1) / 60.0
                                             for i in range(536, 600)]
    finally:
        server.stop()


# ---------------------------------------------------------------------- c8

def test_c08_multi_device_shared_roi_and_anchor(seeded_root, tmp_path):
    """demo3 with two simulated devices: both receive byte-identical ROI
    volume specs, and the anchor device A created is resolved by device B
    at exactly the stored position."""
    from xrflow.cli import orchestrate
    root = fresh_copy(seeded_root, tmp_path)
    scen = root / "scenarios"
    result = orchestrate(root, "demo3",
                         [scen / "demo3_a.json", scen / "demo3_b.json"],
                         seed=3)
    assert result["ok"], result

    scene_a = result["scenes"]["dev1"]
    scene_b = result["scenes"]["dev2"]
    assert "n0009" in scene_a and "n0009" in scene_b
    assert scene_a["n0009"]["payload"] == scene_b["n0009"]["payload"]
    assert scene_a["n0009"]["mark"] == "volume"

    anchors = WorkspaceStore(root / "workspaces").load("demo3")["anchors"]
    assert len(anchors) == 1
    stored = anchors[0]["position"]
    for scene in (scene_a, scene_b):
        placed = parse_spec(scene["n0009"]["payload"])
        assert placed.link.kind == "TargetLink"
        assert list(placed.link.position) == stored
        assert list(scene["n0009"]["world"]["translation"]) == stored


# ---------------------------------------------------------------------- c9

def _random_similarity(rng):
    return Similarity(rotation=random_rotation(rng, np.pi),
                      translation=rng.uniform(-2, 2, 3),
                      scale=float(rng.uniform(0.5, 2.0)))


def test_c09_link_resolution_consistency(store):
    """AxisLink: shared-field domain endpoints land on identical world
    points on both specs (1e-9). ObjectLink: resolving a 3-chain equals
    resolving against the pre-composed tail, bit for bit, 100 trials."""
    rng = np.random.default_rng(99)

    # AxisLink equal-values property
    for trial in range(25):
        target_tf = _random_similarity(rng)
        rows_t = [{"f": float(v)} for v in np.linspace(3.0, 11.0, 7)]
        target = build_spec(
            DataValue.table(Table.from_records(rows_t)), "point",
            {"x": "f"}, "world", target_tf, store, f"t{trial}")
        rows_s = [{"f": float(v), "g": float(v * 2)}
                  for v in np.linspace(3.0, 11.0, 5)]
        source = build_spec(
            DataValue.table(Table.from_records(rows_s)), "point",
            {"x": "g", "y": "f"}, "world", Similarity.identity(), store,
            f"s{trial}",
            link=Link(kind="AxisLink", spec_id=f"t{trial}", shared_field="f"))
        resolved = resolve_link(source, {target.spec_id: target,
                                         source.spec_id: source})
        tw = json.loads(serialize_spec(target))
        sw = json.loads(serialize_spec(source))
        lo, hi = 3.0, 11.0
        for value in (lo, (lo + hi) / 2.0, hi):
            p_target = world_point_of_domain_value(
                tw["transform"], "x", tw["channels"]["x"]["scale"], value)
            p_source = world_point_of_domain_value(
                resolved.to_wire(), "y", sw["channels"]["y"]["scale"], value)
            assert np.linalg.norm(p_target - p_source) <= 1e-9

    # ObjectLink associativity
    from dataclasses import replace
    for trial in range(100):
        table = Table.from_records([{"x": float(i)} for i in range(4)])
        specs = {}
        tfs = {}
        for name in ("a", "b", "c"):
            tfs[name] = _random_similarity(rng)
        specs["c"] = build_spec(DataValue.table(table), "point", {"x": "x"},
                                "world", tfs["c"], store, "c")
        specs["b"] = build_spec(DataValue.table(table), "point", {"x": "x"},
                                "world", tfs["b"], store, "b",
                                link=Link(kind="ObjectLink", spec_id="c"))
        specs["a"] = build_spec(DataValue.table(table), "point", {"x": "x"},
                                "world", tfs["a"], store, "a",
                                link=Link(kind="ObjectLink", spec_id="b"))
        full = resolve_link(specs["a"], specs)

        pre_b = replace(specs["b"], transform=resolve_link(specs["b"], specs),
                        link=None)
        against_pre = resolve_link(specs["a"], {"a": specs["a"], "b": pre_b})
        assert np.array_equal(full.rotation, against_pre.rotation)
        assert np.array_equal(full.translation, against_pre.translation)
        assert full.scale == against_pre.scale


# --------------------------------------------------------------------- c10

_PALETTE = (
    ("DataFile", {"path": "rows.json"}, (), (("table", DataKind.TABLE),)),
    ("Image3DFile", {"path": "vol.raw"}, (), (("volume", DataKind.VOLUME3D),)),
    ("IsoSurface", {"isovalue": 0.5}, (("volume", DataKind.VOLUME3D),),
     (("mesh", DataKind.MESH),)),
    ("CurvatureCalc", {}, (("mesh", DataKind.MESH),),
     (("mesh", DataKind.MESH),)),
    ("VolumeToPoints", {"threshold": 10.0, "stride": 2},
     (("volume", DataKind.VOLUME3D),), (("points", DataKind.POINTCLOUD),)),
    ("VisualEncoding", {"mark": "point", "channels": {"x": "x"}},
     (("data", DataKind.TABLE),), (("spec", DataKind.VISSPEC),)),
)


def test_c10_workspace_round_trip_and_demo_runs(seeded_root, tmp_path):
    """100 random workflows survive serialize/deserialize structurally;
    every bundled demo executes headlessly with exit code 0."""
    registry = build_default_registry()
    rng = np.random.default_rng(1010)
    for case in range(100):
        wf = Workflow(registry)
        outputs = {}   # kind -> [(node_id, port)]
        for _ in range(int(rng.integers(2, 12))):
            kind, params, inputs, outs = _PALETTE[int(rng.integers(0, len(_PALETTE)))]
            if any(k not in outputs for _, k in inputs):
                kind, params, inputs, outs = _PALETTE[int(rng.integers(0, 2))]
            params = dict(params)
            if "isovalue" in params:
                params["isovalue"] = float(rng.uniform(-3, 3))
            nid = wf.add_node(kind, params)
            for pname, pkind in inputs:
                src_id, src_port = outputs[pkind][
                    int(rng.integers(0, len(outputs[pkind])))]
                wf.connect(src_id, src_port, nid, pname)
            for oname, okind in outs:
                outputs.setdefault(okind, []).append((nid, oname))

        doc = wf.serialize(access_code=f"case{case}")
        back = Workflow.deserialize(doc, registry)
        assert back.serialize(access_code=f"case{case}") == doc
        assert set(back.nodes) == set(wf.nodes)
        for nid in wf.nodes:
            assert back.nodes[nid].kind == wf.nodes[nid].kind
            assert back.nodes[nid].params == wf.nodes[nid].params
        assert {(e.src, e.src_port, e.dst, e.dst_port)
                for e in back.edges.values()} == \
               {(e.src, e.src_port, e.dst, e.dst_port)
                for e in wf.edges.values()}

    root = fresh_copy(seeded_root, tmp_path)
    for code in ("demo1", "demo2", "demo3", "demo4"):
        proc = subprocess.run(
            [sys.executable, "-m", "xrflow.cli", "run", "--workspace", code,
             "--headless", "--data-root", str(root), "--seed", "42"],
            capture_output=True, text=True, timeout=300)
        assert proc.returncode == 0, f"{code}: {proc.stderr[-2000:]}"
