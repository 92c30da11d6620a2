"""Seeded demo fixtures: data files, four workspaces, scenario scripts.

Access codes demo1..demo4 cover the whole surface: tables with linked charts,
a volume pipeline with registration against a depth capture, a two-device
shared ROI with gesture input, and a plain anchored scatter.

Everything regenerates deterministically; re-seeding overwrites in place.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .datastore import DataStore, atomic_write
from .gateway.workspaces import WorkspaceStore
from .geometry import Pose, rotation_about_axis
from .graph import Workflow
from .nodes import build_default_registry
from .nodes.points import volume_to_points
from .synthetic import cars_table, ct_volume, lebron_table, microscopy_volume, splat_depth

DEMO_CODES = ("demo1", "demo2", "demo3", "demo4")

# demo2 ground truth: the "patient" is the model moved by this transform
DEMO2_ROT = rotation_about_axis(np.array([0.0, 1.0, 0.0]), np.deg2rad(2.0))
DEMO2_T = np.array([0.03, 0.01, 0.05])
DEMO2_CAMERA = {"fx": 120.0, "fy": 120.0, "cx": 79.5, "cy": 59.5}
DEMO2_CAM_POSE = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0]  # camera 1 m behind origin

DEMO3_TAP = [3.0, -2.0, 5.0]
DEMO1_MARKER = [2.0, 0.0, 3.0]
DEMO4_TARGET = [1.0, 0.5, 2.0]


def _write_table_json(path: Path, table) -> None:
    atomic_write(path, json.dumps(table.rows, sort_keys=True).encode())


def _write_table_csv(path: Path, table) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=table.columns)
        writer.writeheader()
        for row in table.rows:
            writer.writerow(row)


def _write_volume(stem: Path, volume) -> None:
    atomic_write(stem.with_suffix(".raw"), volume.samples.tobytes())
    sidecar = {"dims": list(volume.dims), "spacing": list(volume.spacing),
               "origin": [float(v) for v in volume.origin],
               "dtype": volume.dtype_name}
    atomic_write(stem.with_suffix(".json"), json.dumps(sidecar).encode())


# ------------------------------------------------------------ the workflows

def build_demo1(registry) -> Workflow:
    """Shot chart: anchored scatter plus two axis-linked bar charts."""
    wf = Workflow(registry)
    data = wf.add_node("DataFile", {"path": "lebron.json"})
    dev = wf.add_node("XRDeviceConnector", {"username": "", "password": ""})
    scatter = wf.add_node("VisualEncoding", {
        "mark": "point", "coordinate_type": "world",
        "channels": {"x": "loc_x", "y": "loc_y",
                     "color": "attempts", "size": "successes"}})
    marker = wf.add_node("MarkerTracking", {"marker_id": "m1"})
    anchor_link = wf.add_node("VisLinking", {"link_kind": "TargetLink"})
    bar1 = wf.add_node("VisualEncoding", {
        "mark": "bar", "coordinate_type": "world",
        "channels": {"x": "loc_x", "y": "attempts"}})
    axis1 = wf.add_node("VisLinking", {"link_kind": "AxisLink",
                                       "shared_field": "loc_x"})
    bar2 = wf.add_node("VisualEncoding", {
        "mark": "bar", "coordinate_type": "world",
        "channels": {"x": "loc_y", "y": "successes"}})
    axis2 = wf.add_node("VisLinking", {"link_kind": "AxisLink",
                                       "shared_field": "loc_y"})
    viz_scatter = wf.add_node("XRVisualization")
    viz_bar1 = wf.add_node("XRVisualization")
    viz_bar2 = wf.add_node("XRVisualization")
    wf.connect(data, "table", scatter, "data")
    wf.connect(dev, "device", marker, "device")
    wf.connect(scatter, "spec", anchor_link, "spec")
    wf.connect(marker, "pose", anchor_link, "anchor")
    wf.connect(data, "table", bar1, "data")
    wf.connect(bar1, "spec", axis1, "spec")
    wf.connect(scatter, "spec", axis1, "target")
    wf.connect(data, "table", bar2, "data")
    wf.connect(bar2, "spec", axis2, "spec")
    wf.connect(scatter, "spec", axis2, "target")
    wf.connect(anchor_link, "spec", viz_scatter, "spec")
    wf.connect(dev, "device", viz_scatter, "device")
    wf.connect(axis1, "spec", viz_bar1, "spec")
    wf.connect(dev, "device", viz_bar1, "device")
    wf.connect(axis2, "spec", viz_bar2, "spec")
    wf.connect(dev, "device", viz_bar2, "device")
    return wf


def build_demo2(registry) -> Workflow:
    """CT pipeline: isosurface + curvature, registered to a depth capture."""
    wf = Workflow(registry)
    vol = wf.add_node("Image3DFile", {"path": "ct.raw"})
    iso = wf.add_node("IsoSurface", {"isovalue": 700})
    curv = wf.add_node("CurvatureCalc")
    dev = wf.add_node("XRDeviceConnector", {"username": "", "password": ""})
    stream = wf.add_node("XRInput", {"kind": "DepthFrame"})
    capture = wf.add_node("RawCapture", {"trigger": "latest"})
    region = wf.add_node("RegionSelection", {"u0": 0, "v0": 0,
                                             "u1": 159, "v1": 119})
    pts = wf.add_node("VolumeToPoints", {"threshold": 900, "stride": 2})
    icp = wf.add_node("IcpRegistration", {"invert": True})
    enc = wf.add_node("VisualEncoding", {"mark": "mesh",
                                         "coordinate_type": "world",
                                         "channels": {"color": "scalar"}})
    viz = wf.add_node("XRVisualization")
    wf.connect(vol, "volume", iso, "volume")
    wf.connect(iso, "mesh", curv, "mesh")
    wf.connect(dev, "device", stream, "device")
    wf.connect(stream, "stream", capture, "stream")
    wf.connect(capture, "image", region, "frame")
    wf.connect(vol, "volume", pts, "volume")
    wf.connect(region, "points", icp, "source")
    wf.connect(pts, "points", icp, "target")
    wf.connect(curv, "mesh", enc, "data")
    wf.connect(icp, "transform", enc, "position")
    wf.connect(enc, "spec", viz, "spec")
    wf.connect(dev, "device", viz, "device")
    return wf


def build_demo3(registry) -> Workflow:
    """Two devices sharing a tap-selected ROI of a microscopy volume."""
    wf = Workflow(registry)
    vol = wf.add_node("Image3DFile", {"path": "cells.raw"})
    dev_a = wf.add_node("XRDeviceConnector", {"username": "", "password": ""})
    dev_b = wf.add_node("XRDeviceConnector", {"username": "", "password": ""})
    hands = wf.add_node("XRInput", {"kind": "HandJoints"})
    gesture = wf.add_node("GestureRecognition")
    anchor = wf.add_node("GenerateSpatialAnchor")
    enc_full = wf.add_node("VisualEncoding", {"mark": "volume",
                                              "coordinate_type": "world"})
    roi = wf.add_node("FindVolumeRoi", {"extent_x": 12, "extent_y": 12,
                                        "extent_z": 12})
    enc_roi = wf.add_node("VisualEncoding", {"mark": "volume",
                                             "coordinate_type": "world"})
    link = wf.add_node("VisLinking", {"link_kind": "TargetLink"})
    viz_a = wf.add_node("XRVisualization")
    viz_b = wf.add_node("XRVisualization")
    viz_full = wf.add_node("XRVisualization")
    wf.connect(dev_a, "device", hands, "device")
    wf.connect(hands, "stream", gesture, "stream")
    wf.connect(gesture, "pose", anchor, "position")
    wf.connect(vol, "volume", enc_full, "data")
    wf.connect(vol, "volume", roi, "volume")
    wf.connect(anchor, "pose", roi, "center")
    wf.connect(roi, "roi", enc_roi, "data")
    wf.connect(enc_roi, "spec", link, "spec")
    wf.connect(anchor, "pose", link, "anchor")
    wf.connect(link, "spec", viz_a, "spec")
    wf.connect(dev_a, "device", viz_a, "device")
    wf.connect(link, "spec", viz_b, "spec")
    wf.connect(dev_b, "device", viz_b, "device")
    wf.connect(enc_full, "spec", viz_full, "spec")
    wf.connect(dev_a, "device", viz_full, "device")
    return wf


def build_demo4(registry) -> Workflow:
    """Cars scatter pinned to a fixed world position."""
    wf = Workflow(registry)
    data = wf.add_node("DataFile", {"path": "cars.csv"})
    dev = wf.add_node("XRDeviceConnector", {"username": "", "password": ""})
    enc = wf.add_node("VisualEncoding", {
        "mark": "point", "coordinate_type": "world",
        "channels": {"x": "weight", "y": "mpg",
                     "color": "cylinders", "size": "horsepower"}})
    link = wf.add_node("VisLinking", {"link_kind": "TargetLink",
                                      "target_x": DEMO4_TARGET[0],
                                      "target_y": DEMO4_TARGET[1],
                                      "target_z": DEMO4_TARGET[2]})
    viz = wf.add_node("XRVisualization")
    wf.connect(data, "table", enc, "data")
    wf.connect(enc, "spec", link, "spec")
    wf.connect(link, "spec", viz, "spec")
    wf.connect(dev, "device", viz, "device")
    return wf


def _grid_layout(wf: Workflow) -> dict:
    """Column = longest path from a source; row = insertion order within it."""
    depth = {}
    incoming: dict = {nid: [] for nid in wf.nodes}
    for e in wf.edges.values():
        incoming[e.dst].append(e.src)

    def depth_of(nid: str) -> int:
        if nid not in depth:
            depth[nid] = 0 if not incoming[nid] else \
                1 + max(depth_of(s) for s in incoming[nid])
        return depth[nid]

    rows: dict = {}
    layout = {}
    for nid in sorted(wf.nodes):
        col = depth_of(nid)
        row = rows.get(col, 0)
        rows[col] = row + 1
        layout[nid] = {"x": 60 + 240 * col, "y": 60 + 130 * row}
    return layout


# -------------------------------------------------------------- scenarios

_IDLE_HEAD = {"track": [[0.0, [0.0, 0.0, 0.0, 1.0, 0.0, 1.6, 0.0]]]}


def _demo2_depth_bake() -> dict:
    """Depth frame of the transformed phantom, as a scenario action."""
    vol = ct_volume(64, spacing=0.01)
    cloud = volume_to_points(vol, 900.0, 2)
    patient = cloud.points @ DEMO2_ROT.T + DEMO2_T
    cam_pose = Pose.from_floats(DEMO2_CAM_POSE)
    img = splat_depth(patient, width=160, height=120,
                      fx=DEMO2_CAMERA["fx"], fy=DEMO2_CAMERA["fy"],
                      camera_pose=cam_pose)
    return {"t": 0.1, "action": "send_depth",
            "width": 160, "height": 120,
            "data": [int(v) for v in img.ravel()],
            "camera": DEMO2_CAMERA, "pose": DEMO2_CAM_POSE}


def demo_scenarios() -> dict:
    """filename -> scenario dict, for every demo."""
    out = {}
    out["demo1.json"] = {
        "name": "demo1", "duration": 1.6, "poll_interval": 0.1,
        "frame_rate": 30, "connector": "n0002",
        "streams": {"HeadPose": _IDLE_HEAD},
        "script": [
            {"t": 0.05, "action": "move_marker", "marker_id": "m1",
             "pose": [0.0, 0.0, 0.0, 1.0] + DEMO1_MARKER},
            {"t": 1.2, "action": "expect_spec", "spec_id": "n0003",
             "mark": "point", "link_kind": "TargetLink",
             "translation": DEMO1_MARKER, "tol": 1e-6,
             "min_data_bytes": 64},
            {"t": 1.2, "action": "expect_spec", "spec_id": "n0006",
             "mark": "bar", "link_kind": "AxisLink"},
            {"t": 1.2, "action": "expect_spec", "spec_id": "n0008",
             "mark": "bar", "link_kind": "AxisLink"},
        ],
    }
    out["demo2.json"] = {
        "name": "demo2", "duration": 2.4, "poll_interval": 0.1,
        "frame_rate": 30, "connector": "n0004",
        "streams": {"HeadPose": _IDLE_HEAD},
        "script": [
            _demo2_depth_bake(),
            {"t": 2.0, "action": "expect_spec", "spec_id": "n0010",
             "mark": "mesh", "translation": [float(v) for v in DEMO2_T],
             "tol": 0.02, "min_data_bytes": 1024},
        ],
    }
    out["demo3_a.json"] = {
        "name": "demo3-a", "duration": 2.2, "poll_interval": 0.1,
        "frame_rate": 30, "connector": "n0002",
        "streams": {"HeadPose": _IDLE_HEAD},
        "script": [
            {"t": 0.4, "action": "air_tap", "position": DEMO3_TAP},
            {"t": 1.7, "action": "expect_spec", "spec_id": "n0009",
             "mark": "volume", "link_kind": "TargetLink",
             "translation": DEMO3_TAP, "tol": 1e-6, "min_data_bytes": 256},
            {"t": 1.7, "action": "expect_spec", "spec_id": "n0007",
             "mark": "volume"},
        ],
        "server_script": [
            {"t": 0.8, "action": "execute_node", "node": "n0005"},
        ],
    }
    out["demo3_b.json"] = {
        "name": "demo3-b", "duration": 2.2, "poll_interval": 0.1,
        "frame_rate": 30, "connector": "n0003",
        "streams": {"HeadPose": _IDLE_HEAD},
        "script": [
            {"t": 1.9, "action": "expect_spec", "spec_id": "n0009",
             "mark": "volume", "link_kind": "TargetLink",
             "translation": DEMO3_TAP, "tol": 1e-6, "min_data_bytes": 256},
        ],
    }
    out["demo4.json"] = {
        "name": "demo4", "duration": 1.2, "poll_interval": 0.1,
        "frame_rate": 30, "connector": "n0002",
        "streams": {"HeadPose": _IDLE_HEAD},
        "script": [
            {"t": 0.9, "action": "expect_spec", "spec_id": "n0003",
             "mark": "point", "link_kind": "TargetLink",
             "translation": DEMO4_TARGET, "tol": 1e-9},
        ],
    }
    return out


def seed_demos(data_root) -> list:
    """Write data files, workspaces, and scenarios; returns the codes."""
    store = DataStore(data_root)
    files = store.files_dir
    _write_table_json(files / "lebron.json", lebron_table())
    _write_table_csv(files / "cars.csv", cars_table())
    _write_volume(files / "ct", ct_volume(64, spacing=0.01))
    _write_volume(files / "cells", microscopy_volume(48))

    registry = build_default_registry()
    workspaces = WorkspaceStore(store.workspaces_dir)
    builders = {"demo1": build_demo1, "demo2": build_demo2,
                "demo3": build_demo3, "demo4": build_demo4}
    for code, build in builders.items():
        wf = build(registry)
        workspaces.save(code, wf.serialize(code), anchors=[],
                        layout=_grid_layout(wf))

    scen_dir = store.scenarios_dir
    for name, scenario in demo_scenarios().items():
        atomic_write(scen_dir / name,
                     json.dumps(scenario, sort_keys=True).encode())
    return list(DEMO_CODES)
