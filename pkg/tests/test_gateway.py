"""Session manager, workspace store, and a REST smoke pass."""
import json

import numpy as np
import pytest
import requests

from xrflow.errors import (
    AlreadyConnected,
    BadCredentials,
    ConflictingVersion,
    MalformedDocument,
    MalformedSpec,
    UnknownDevice,
    UnknownWorkspace,
)
from xrflow.gateway.service import GatewayServer
from xrflow.gateway.sessions import SessionManager
from xrflow.gateway.workspaces import WorkspaceStore
from xrflow.geometry import Similarity
from xrflow.grammar import build_spec, serialize_spec
from xrflow.values import DataKind, DataValue, Table


def spec_string(store, spec_id="s1"):
    table = Table.from_records(
        [{"x": float(i), "y": float(i * i)} for i in range(5)])
    spec = build_spec(
        DataValue(DataKind.TABLE, table), "point",
        {"x": {"field": "x"}, "y": {"field": "y"}},
        "view", Similarity.identity(), store, spec_id,
    )
    return serialize_spec(spec)


# ------------------------------------------------------------- handshake

def test_request_connection_mints_distinct_credentials():
    mgr = SessionManager(seed=7)
    a = mgr.request_connection()
    b = mgr.request_connection()
    assert a["username"] != b["username"]
    assert a["device_key"] != b["device_key"]
    for cred in (a, b):
        assert set(cred) == {"username", "password", "device_key"}


def test_device_key_uniqueness_sweep():
    mgr = SessionManager(seed=0)
    keys = {mgr.request_connection()["device_key"] for _ in range(1000)}
    assert len(keys) == 1000


def test_connect_returns_promised_key():
    mgr = SessionManager(seed=1)
    cred = mgr.request_connection()
    key = mgr.connect_device(cred["username"], cred["password"])
    assert key == cred["device_key"]
    assert mgr.get(key).username == cred["username"]
    assert mgr.live_keys() == [key]


def test_connect_rejects_bad_password():
    mgr = SessionManager(seed=2)
    cred = mgr.request_connection()
    with pytest.raises(BadCredentials):
        mgr.connect_device(cred["username"], "wrong")
    # the pending entry survives a failed attempt
    assert mgr.connect_device(cred["username"], cred["password"])


def test_connect_twice_is_already_connected():
    mgr = SessionManager(seed=3)
    cred = mgr.request_connection()
    mgr.connect_device(cred["username"], cred["password"])
    with pytest.raises(AlreadyConnected):
        mgr.connect_device(cred["username"], cred["password"])
    # same username, wrong password: the caller learns nothing about liveness
    with pytest.raises(BadCredentials):
        mgr.connect_device(cred["username"], "nope")


def test_connect_unknown_username():
    mgr = SessionManager(seed=4)
    with pytest.raises(BadCredentials):
        mgr.connect_device("ghost", "pw")


def test_resolve_is_idempotent():
    mgr = SessionManager(seed=5)
    cred = mgr.request_connection()
    k1 = mgr.resolve(cred["username"], cred["password"])
    k2 = mgr.resolve(cred["username"], cred["password"])
    assert k1 == k2 == cred["device_key"]
    with pytest.raises(BadCredentials):
        mgr.resolve(cred["username"], "wrong")


def test_resolve_joins_live_device_session():
    # device connects first, then the workflow resolves the same credentials
    mgr = SessionManager(seed=6)
    cred = mgr.request_connection()
    key = mgr.connect_device(cred["username"], cred["password"])
    assert mgr.resolve(cred["username"], cred["password"]) == key


# ------------------------------------------------------------- the queue

def connected(mgr):
    cred = mgr.request_connection()
    return mgr.connect_device(cred["username"], cred["password"])


def test_poll_requires_live_session():
    mgr = SessionManager(seed=8)
    with pytest.raises(UnknownDevice):
        mgr.poll("deadbeef")
    cred = mgr.request_connection()
    # requested but never connected: still unknown to the queue
    with pytest.raises(UnknownDevice):
        mgr.poll(cred["device_key"])


def test_poll_empty_literal():
    mgr = SessionManager(seed=9)
    key = connected(mgr)
    assert mgr.poll(key) == {"status": "empty"}


def test_fifo_order_and_task_ids():
    mgr = SessionManager(seed=10)
    key = connected(mgr)
    ta = mgr.enqueue(key, "RenderSpec", "payload-a")
    tb = mgr.enqueue(key, "ClearScene", "")
    assert (ta, tb) == ("t1", "t2")
    first = mgr.poll(key)
    second = mgr.poll(key)
    assert [first["task_id"], second["task_id"]] == ["t1", "t2"]
    assert first["payload"] == "payload-a"
    assert first["kind"] == "RenderSpec"
    assert second["kind"] == "ClearScene"
    assert mgr.poll(key) == {"status": "empty"}


def test_enqueue_unknown_device():
    mgr = SessionManager(seed=11)
    with pytest.raises(UnknownDevice):
        mgr.enqueue("nokey", "RenderSpec", "x")


def test_enqueue_after_disconnect(store):
    mgr = SessionManager(seed=12)
    key = connected(mgr)
    mgr.disconnect(key)
    with pytest.raises(UnknownDevice):
        mgr.enqueue_render(key, spec_string(store))
    with pytest.raises(UnknownDevice):
        mgr.poll(key)
    assert mgr.live_keys() == []


def test_enqueue_render_validates_payload(store):
    mgr = SessionManager(seed=13)
    key = connected(mgr)
    with pytest.raises(MalformedSpec):
        mgr.enqueue_render(key, "{not a spec")
    with pytest.raises(MalformedSpec):
        mgr.enqueue_render(key, json.dumps({"schema_version": 1}))
    # nothing half-queued by the failures
    assert mgr.poll(key) == {"status": "empty"}


def test_enqueue_render_payload_round_trip(store):
    mgr = SessionManager(seed=14)
    key = connected(mgr)
    payload = spec_string(store)
    mgr.enqueue_render(key, payload)
    task = mgr.poll(key)
    assert task["kind"] == "RenderSpec"
    assert task["payload"] == payload


def test_same_spec_to_two_devices_identical(store):
    mgr = SessionManager(seed=15)
    ka, kb = connected(mgr), connected(mgr)
    payload = spec_string(store)
    mgr.enqueue_render(ka, payload)
    mgr.enqueue_render(kb, payload)
    assert mgr.poll(ka)["payload"] == mgr.poll(kb)["payload"] == payload


# ------------------------------------------------------- workspace store

def test_workspace_save_load_round_trip(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    doc = {"nodes": [], "edges": []}
    record = ws.save("demo", doc)
    assert record["version"] == 1
    assert record["access_code"] == "demo"
    loaded = ws.load("demo")
    assert loaded["document"] == doc
    assert loaded["version"] == 1
    assert loaded["anchors"] == []


def test_workspace_version_bumps_and_conflicts(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    ws.save("w", {"nodes": []})
    rec2 = ws.save("w", {"nodes": ["x"]}, version=1)
    assert rec2["version"] == 2
    with pytest.raises(ConflictingVersion):
        ws.save("w", {"nodes": ["y"]}, version=1)
    # version=None skips the optimistic check
    assert ws.save("w", {"nodes": ["z"]})["version"] == 3


def test_workspace_sidecars_survive_document_rewrites(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    ws.save("w", {"nodes": []}, anchors=[{"anchor_id": "a1"}],
            layout={"n0001": [10, 20]})
    rec = ws.save("w", {"nodes": ["changed"]})
    assert rec["anchors"] == [{"anchor_id": "a1"}]
    assert rec["layout"] == {"n0001": [10, 20]}
    rec = ws.save("w", {"nodes": ["changed"]}, anchors=[])
    assert rec["anchors"] == []
    assert rec["layout"] == {"n0001": [10, 20]}


def test_workspace_rejects_bad_codes(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    for code in ("", "a/b", "../escape", ".hidden"):
        with pytest.raises(UnknownWorkspace):
            ws.save(code, {})
        with pytest.raises(UnknownWorkspace):
            ws.load(code)


def test_workspace_load_missing(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    with pytest.raises(UnknownWorkspace):
        ws.load("nothing")
    assert not ws.exists("nothing")


def test_workspace_document_must_be_object(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    with pytest.raises(MalformedDocument):
        ws.save("w", ["not", "an", "object"])


def test_workspace_list_codes_sorted(tmp_path):
    ws = WorkspaceStore(tmp_path / "ws")
    for code in ("zeta", "alpha", "mid"):
        ws.save(code, {})
    assert ws.list_codes() == ["alpha", "mid", "zeta"]


# ------------------------------------------------------------- REST smoke

@pytest.fixture(scope="module")
def server(tmp_path_factory):
    root = tmp_path_factory.mktemp("gwdata")
    srv = GatewayServer(root, port=0, seed=99).start()
    yield srv
    srv.stop()


def api(server, path):
    return server.address + path


def test_rest_health_and_registry(server):
    health = requests.get(api(server, "/api/health"), timeout=5).json()
    assert health["status"] == "ok"
    listing = requests.get(api(server, "/api/registry"), timeout=5).json()
    kinds = {entry["kind"] for entry in listing["nodes"]}
    assert {"IsoSurface", "XRDeviceConnector", "VisualEncoding"} <= kinds


def test_rest_device_lifecycle(server):
    cred = requests.post(api(server, "/api/device/request"), timeout=5).json()
    got = requests.post(api(server, "/api/device/connect"),
                        json={"username": cred["username"],
                              "password": cred["password"]},
                        timeout=5).json()
    key = got["device_key"]
    assert key == cred["device_key"]

    payload = spec_string(server.state.store, spec_id="rest1")
    queued = requests.post(api(server, f"/api/device/{key}/render"),
                           json={"spec": payload}, timeout=5)
    assert queued.status_code == 200

    task = requests.get(api(server, f"/api/device/{key}/poll"), timeout=5).json()
    assert task["kind"] == "RenderSpec"
    assert task["payload"] == payload
    again = requests.get(api(server, f"/api/device/{key}/poll"), timeout=5).json()
    assert again == {"status": "empty"}

    # malformed spec and unknown key map onto 400 / 404
    bad = requests.post(api(server, f"/api/device/{key}/render"),
                        json={"spec": "{oops"}, timeout=5)
    assert bad.status_code == 400
    missing = requests.get(api(server, "/api/device/feedface/poll"), timeout=5)
    assert missing.status_code == 404


def test_rest_workspace_conflict(server):
    code = "resttest"
    doc = {"nodes": [], "edges": []}
    first = requests.post(api(server, f"/api/workspace/{code}/save"),
                          json={"document": doc}, timeout=5).json()
    assert first["version"] == 1
    stale = requests.post(api(server, f"/api/workspace/{code}/save"),
                          json={"document": doc, "version": 0}, timeout=5)
    assert stale.status_code == 409
    fetched = requests.get(api(server, f"/api/workspace/{code}"), timeout=5).json()
    assert fetched["document"] == doc


def test_rest_files_listing(server):
    files_dir = server.state.store.files_dir
    files_dir.mkdir(parents=True, exist_ok=True)
    (files_dir / "b.csv").write_text("x\n1\n")
    (files_dir / "a.json").write_text("[]")
    listing = requests.get(api(server, "/api/files"), timeout=5).json()
    names = [f["name"] for f in listing["files"]]
    assert names == sorted(names)
    assert {"a.json", "b.csv"} <= set(names)
    by_name = {f["name"]: f for f in listing["files"]}
    assert by_name["b.csv"]["suffix"] == "csv"
    assert by_name["a.json"]["size"] == 2

    # no ui bundle configured on this server, so / is not served
    assert requests.get(api(server, "/"), timeout=5).status_code == 404


def test_rest_webui_mount(tmp_path):
    bundle = tmp_path / "dist"
    bundle.mkdir()
    (bundle / "index.html").write_text("<!doctype html><title>panel</title>")
    srv = GatewayServer(tmp_path / "data", port=0, webui_dir=bundle).start()
    try:
        page = requests.get(srv.address + "/", timeout=5)
        assert page.status_code == 200
        assert "panel" in page.text
        # api routes keep precedence over the mount
        health = requests.get(srv.address + "/api/health", timeout=5).json()
        assert health["status"] == "ok"
    finally:
        srv.stop()
