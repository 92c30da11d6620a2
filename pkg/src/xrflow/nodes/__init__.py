"""Built-in node kinds: evaluators plus the default registry.

Evaluators are pure given (inputs, params) except for the explicitly
service-backed kinds (device connector, stream readers, rendering), which go
through the gateway handle on the execution context.
"""
from __future__ import annotations

import numpy as np

from ..errors import (
    CycleDetected,
    DanglingLink,
    FlowError,
    KindMismatch,
    NoGesture,
    StreamClosed,
    UnknownMarker,
)
from ..geometry import Pose, Similarity
from ..grammar import Link, VisSpec, build_spec, serialize_spec
from ..registry import ANY_KIND, NodeSpec, ParamSpec, Registry, param_value, port
from ..streams import SENSOR_KINDS, records_to_rows, record_image
from ..values import DataKind, DataValue, StreamHandle, Table
from . import custom as custom_fns
from .curvature import compute_curvature
from .io import load_image, load_table, load_volume
from .isosurface import iso_surface
from .points import select_region, volume_to_points
from .registration import register_icp
from .roi import extract_roi


def _gateway(ctx):
    if ctx.gateway is None:
        raise FlowError("this node needs a running gateway")
    return ctx.gateway


def _params(ctx, node):
    spec = ctx.registry.get(node.kind)
    return lambda name: param_value(spec, node.params, name)


# ------------------------------------------------------------------ Device

def eval_device_connector(ctx, node, inputs):
    p = _params(ctx, node)
    key = _gateway(ctx).sessions.resolve(p("username"), p("password"))
    return {"device": DataValue.device_key(key)}


# ------------------------------------------------------------------- Input

def eval_data_file(ctx, node, inputs):
    p = _params(ctx, node)
    path = ctx.store.resolve_file(p("path"))
    return {"table": DataValue.table(load_table(path))}


def eval_image_data(ctx, node, inputs):
    p = _params(ctx, node)
    path = ctx.store.resolve_file(p("path"))
    return {"image": DataValue.image(load_image(path))}


def eval_image3d_file(ctx, node, inputs):
    p = _params(ctx, node)
    path = ctx.store.resolve_file(p("path"))
    return {"volume": DataValue.volume(load_volume(path))}


def eval_xr_input(ctx, node, inputs):
    p = _params(ctx, node)
    kind = p("kind")
    if kind not in SENSOR_KINDS:
        raise KindMismatch(f"unknown sensor kind {kind!r}")
    key = inputs["device"].payload
    _gateway(ctx).sessions.get(key)  # must be a live session
    return {"stream": DataValue.stream(StreamHandle(device_key=key, kind=kind))}


def eval_data_queue(ctx, node, inputs):
    p = _params(ctx, node)
    capacity = int(p("capacity"))
    window = p("window")
    window = capacity if window is None else int(window)
    handle: StreamHandle = inputs["stream"].payload
    hub = _gateway(ctx).hub
    records = hub.window(handle.device_key, handle.kind, min(window, capacity))
    rows = records_to_rows(handle.kind, records)
    return {"table": DataValue.table(Table.from_records(rows))}


# --------------------------------------------------------- Processing/Data

def eval_iso_surface(ctx, node, inputs):
    p = _params(ctx, node)
    mesh = iso_surface(inputs["volume"].payload, float(p("isovalue")))
    return {"mesh": DataValue.mesh(mesh)}


def eval_volume_to_points(ctx, node, inputs):
    p = _params(ctx, node)
    cloud = volume_to_points(inputs["volume"].payload, float(p("threshold")),
                             int(p("stride")))
    return {"points": DataValue.cloud(cloud)}


def eval_curvature(ctx, node, inputs):
    return {"mesh": DataValue.mesh(compute_curvature(inputs["mesh"].payload))}


def eval_find_volume_roi(ctx, node, inputs):
    p = _params(ctx, node)
    center = inputs["center"].payload.translation
    placement = inputs.get("placement")
    vis_transform = placement.payload.transform if placement is not None else None
    roi = extract_roi(inputs["volume"].payload, center,
                      (float(p("extent_x")), float(p("extent_y")),
                       float(p("extent_z"))),
                      vis_transform)
    return {"roi": DataValue.volume(roi)}


def eval_custom(ctx, node, inputs):
    p = _params(ctx, node)
    out = custom_fns.run_custom(p("endpoint"), p("function"), p("args") or {},
                                inputs["input"])
    return {"output": out}


# ----------------------------------------------------- Processing/Position

def eval_region_selection(ctx, node, inputs):
    p = _params(ctx, node)
    rect = (int(p("u0")), int(p("v0")), int(p("u1")), int(p("v1")))
    cloud = select_region(inputs["frame"].payload, rect)
    return {"points": DataValue.cloud(cloud)}


def eval_icp(ctx, node, inputs):
    p = _params(ctx, node)
    R, t, rms = register_icp(inputs["source"].payload, inputs["target"].payload,
                             max_iterations=int(p("max_iterations")),
                             tolerance=float(p("tolerance")))
    if p("invert"):
        R, t = R.T, -(R.T @ t)
    return {"transform": DataValue.pose(Pose.from_matrix(R, t)),
            "rms": DataValue.scalar(rms)}


def eval_vis_linking(ctx, node, inputs):
    from dataclasses import replace
    p = _params(ctx, node)
    spec: VisSpec = inputs["spec"].payload
    kind = p("link_kind")
    if kind == "TargetLink":
        anchor = inputs.get("anchor")
        if anchor is not None:
            position = [float(v) for v in anchor.payload.translation]
        else:
            position = [float(p("target_x")), float(p("target_y")),
                        float(p("target_z"))]
        link = Link(kind="TargetLink", position=position)
    elif kind in ("AxisLink", "ObjectLink"):
        target = inputs.get("target")
        if target is None:
            raise DanglingLink(f"{kind} needs a target spec input")
        tspec: VisSpec = target.payload
        # direct cycles are rejected here; longer ones fail at resolution
        if tspec.link is not None and tspec.link.spec_id == spec.spec_id:
            raise CycleDetected(
                f"linking {spec.spec_id} to {tspec.spec_id} closes a link cycle")
        if tspec.spec_id == spec.spec_id:
            raise CycleDetected("a spec cannot link to itself")
        if kind == "AxisLink":
            link = Link(kind="AxisLink", spec_id=tspec.spec_id,
                        shared_field=p("shared_field"))
            if spec.positional_channel_of(link.shared_field) is None or \
                    tspec.positional_channel_of(link.shared_field) is None:
                from ..errors import SharedFieldMissing
                raise SharedFieldMissing(
                    f"{link.shared_field!r} is not positionally encoded by both specs")
        else:
            link = Link(kind="ObjectLink", spec_id=tspec.spec_id)
    else:
        raise FlowError(f"unknown link_kind {kind!r}")
    return {"spec": DataValue.vis_spec(replace(spec, link=link))}


# ------------------------------------------------------- Processing/Sensor

def _hand_taps(records, threshold: float):
    """(timestamp, midpoint) of every pinch onset in a hand-joint window."""
    taps = []
    pinched = False
    for rec in records:
        thumb, index = rec.value
        gap = float(np.linalg.norm(thumb.translation - index.translation))
        if gap < threshold and not pinched:
            mid = (thumb.translation + index.translation) / 2.0
            taps.append((rec.timestamp, mid))
        pinched = gap < threshold
    return taps


def eval_gesture_recognition(ctx, node, inputs):
    p = _params(ctx, node)
    handle: StreamHandle = inputs["stream"].payload
    if handle.kind != "HandJoints":
        raise KindMismatch("gesture recognition reads a HandJoints stream")
    hub = _gateway(ctx).hub
    records = hub.window(handle.device_key, "HandJoints", None)
    if not records:
        raise StreamClosed("no hand tracking data received yet")
    taps = _hand_taps(records, float(p("pinch_threshold")))
    if not taps:
        raise NoGesture("no air tap in the observed window")
    ts, mid = taps[-1]
    return {"pose": DataValue.pose(Pose(translation=mid))}


def eval_marker_tracking(ctx, node, inputs):
    p = _params(ctx, node)
    key = inputs["device"].payload
    hub = _gateway(ctx).hub
    _gateway(ctx).sessions.get(key)
    found = hub.latest_marker(key, p("marker_id"))
    if found is None:
        raise UnknownMarker(f"marker {p('marker_id')!r} never reported by this device")
    ts, pose = found
    return {"pose": DataValue.pose(pose)}


def eval_spatial_anchor(ctx, node, inputs):
    pose: Pose = inputs["position"].payload
    if ctx.workspace is not None:
        ctx.workspace.add_anchor(pose.translation)
    return {"pose": DataValue.pose(pose)}


def eval_raw_capture(ctx, node, inputs):
    p = _params(ctx, node)
    handle: StreamHandle = inputs["stream"].payload
    if handle.kind not in ("DepthFrame", "ColorFrame"):
        raise KindMismatch("raw capture reads a DepthFrame or ColorFrame stream")
    hub = _gateway(ctx).hub
    trigger = p("trigger")
    if trigger == "latest":
        rec = hub.latest(handle.device_key, handle.kind)
        if rec is None:
            raise StreamClosed("no frames received yet")
    elif trigger == "air_tap":
        hands = hub.window(handle.device_key, "HandJoints", None)
        taps = _hand_taps(hands, float(p("pinch_threshold")))
        if not taps:
            raise NoGesture("no air tap to capture at")
        tap_ts = taps[-1][0]
        frames = [r for r in hub.window(handle.device_key, handle.kind, None)
                  if r.timestamp <= tap_ts]
        if not frames:
            raise StreamClosed("no frame at or before the air tap")
        rec = frames[-1]
    else:
        raise FlowError(f"unknown trigger {trigger!r}")
    image = record_image(rec)
    pose_floats = rec.header.get("pose")
    pose = Pose.from_floats(pose_floats) if pose_floats else Pose.identity()
    return {"image": DataValue.image(image), "pose": DataValue.pose(pose)}


# ----------------------------------------------------- Processing/Encoding

def eval_visual_encoding(ctx, node, inputs):
    p = _params(ctx, node)
    scale = float(p("scale"))
    position = inputs.get("position")
    if position is not None:
        transform = position.payload.to_similarity(scale)
    else:
        transform = Similarity(scale=scale)
    spec = build_spec(inputs["data"], p("mark"), p("channels") or {},
                      p("coordinate_type"), transform, ctx.store, spec_id=node.id)
    return {"spec": DataValue.vis_spec(spec)}


# --------------------------------------------------------------- Rendering

def eval_xr_visualization(ctx, node, inputs):
    spec: VisSpec = inputs["spec"].payload
    key = inputs["device"].payload
    payload = serialize_spec(spec)
    task_id = _gateway(ctx).sessions.enqueue_render(key, payload)
    return {"status": DataValue.text(f"queued {task_id} for {key}")}


def build_default_registry() -> Registry:
    reg = Registry()
    K = DataKind
    reg.register(NodeSpec(
        kind="XRDeviceConnector", category="Device",
        outputs=(port("device", K.DEVICE_KEY),),
        params=(ParamSpec("username", "text", required=True),
                ParamSpec("password", "text", required=True)),
        evaluator=eval_device_connector,
        description="Claims a pending device registration and emits its device key."))
    reg.register(NodeSpec(
        kind="DataFile", category="Input",
        outputs=(port("table", K.TABLE),),
        params=(ParamSpec("path", "text", required=True),),
        evaluator=eval_data_file,
        description="Loads a table from a .json or .csv file."))
    reg.register(NodeSpec(
        kind="ImageData", category="Input",
        outputs=(port("image", K.IMAGE2D),),
        params=(ParamSpec("path", "text", required=True),),
        evaluator=eval_image_data,
        description="Loads a .png or .pgm image."))
    reg.register(NodeSpec(
        kind="Image3DFile", category="Input",
        outputs=(port("volume", K.VOLUME3D),),
        params=(ParamSpec("path", "text", required=True),),
        evaluator=eval_image3d_file,
        description="Loads a raw volume with its JSON sidecar."))
    reg.register(NodeSpec(
        kind="XRInput", category="Input",
        inputs=(port("device", K.DEVICE_KEY),),
        outputs=(port("stream", K.STREAM_HANDLE),),
        params=(ParamSpec("kind", "text", required=True),),
        evaluator=eval_xr_input,
        description="Names one sensor stream of a connected device."))
    reg.register(NodeSpec(
        kind="DataQueue", category="Input",
        inputs=(port("stream", K.STREAM_HANDLE),),
        outputs=(port("table", K.TABLE),),
        params=(ParamSpec("capacity", "number", default=64),
                ParamSpec("window", "number", default=None)),
        evaluator=eval_data_queue,
        description="Tabulates the most recent sensor records."))
    reg.register(NodeSpec(
        kind="IsoSurface", category="Processing/Data",
        inputs=(port("volume", K.VOLUME3D),),
        outputs=(port("mesh", K.MESH),),
        params=(ParamSpec("isovalue", "number", required=True),),
        evaluator=eval_iso_surface,
        description="Marching-cubes isosurface of a volume."))
    reg.register(NodeSpec(
        kind="VolumeToPoints", category="Processing/Data",
        inputs=(port("volume", K.VOLUME3D),),
        outputs=(port("points", K.POINTCLOUD),),
        params=(ParamSpec("threshold", "number", required=True),
                ParamSpec("stride", "number", default=1)),
        evaluator=eval_volume_to_points,
        description="Point cloud of voxel centers above a threshold."))
    reg.register(NodeSpec(
        kind="CurvatureCalc", category="Processing/Data",
        inputs=(port("mesh", K.MESH),),
        outputs=(port("mesh", K.MESH),),
        evaluator=eval_curvature,
        description="Per-vertex mean curvature as a scalar field."))
    reg.register(NodeSpec(
        kind="FindVolumeRoi", category="Processing/Data",
        inputs=(port("volume", K.VOLUME3D),
                port("center", K.POSE),
                port("placement", K.VISSPEC, required=False)),
        outputs=(port("roi", K.VOLUME3D),),
        params=(ParamSpec("extent_x", "number", required=True),
                ParamSpec("extent_y", "number", required=True),
                ParamSpec("extent_z", "number", required=True)),
        evaluator=eval_find_volume_roi,
        description="Extracts the sub-volume under a world-space box."))
    reg.register(NodeSpec(
        kind="Custom", category="Processing/Data",
        inputs=(port("input", ANY_KIND),),
        outputs=(port("output", ANY_KIND),),
        params=(ParamSpec("endpoint", "text", required=True),
                ParamSpec("function", "text", required=True),
                ParamSpec("args", "json", default=None)),
        evaluator=eval_custom,
        description="Runs a named function on a remote endpoint."))
    reg.register(NodeSpec(
        kind="RegionSelection", category="Processing/Position",
        inputs=(port("frame", K.IMAGE2D),),
        outputs=(port("points", K.POINTCLOUD),),
        params=(ParamSpec("u0", "number", required=True),
                ParamSpec("v0", "number", required=True),
                ParamSpec("u1", "number", required=True),
                ParamSpec("v1", "number", required=True)),
        evaluator=eval_region_selection,
        description="Back-projects a depth-frame rectangle to world points."))
    reg.register(NodeSpec(
        kind="IcpRegistration", category="Processing/Position",
        inputs=(port("source", K.POINTCLOUD), port("target", K.POINTCLOUD)),
        outputs=(port("transform", K.POSE), port("rms", K.SCALAR)),
        params=(ParamSpec("max_iterations", "number", default=100),
                ParamSpec("tolerance", "number", default=1e-8),
                ParamSpec("invert", "boolean", default=False)),
        evaluator=eval_icp,
        description="Rigid registration of two point clouds."))
    reg.register(NodeSpec(
        kind="VisLinking", category="Processing/Position",
        inputs=(port("spec", K.VISSPEC),
                port("target", K.VISSPEC, required=False),
                port("anchor", K.POSE, required=False)),
        outputs=(port("spec", K.VISSPEC),),
        params=(ParamSpec("link_kind", "text", required=True),
                ParamSpec("shared_field", "text", default=""),
                ParamSpec("target_x", "number", default=0.0),
                ParamSpec("target_y", "number", default=0.0),
                ParamSpec("target_z", "number", default=0.0)),
        evaluator=eval_vis_linking,
        description="Attaches a placement link to a spec."))
    reg.register(NodeSpec(
        kind="GestureRecognition", category="Processing/Sensor",
        inputs=(port("stream", K.STREAM_HANDLE),),
        outputs=(port("pose", K.POSE),),
        params=(ParamSpec("pinch_threshold", "number", default=0.015),),
        evaluator=eval_gesture_recognition,
        description="Air-tap pose from a hand tracking stream."))
    reg.register(NodeSpec(
        kind="MarkerTracking", category="Processing/Sensor",
        inputs=(port("device", K.DEVICE_KEY),),
        outputs=(port("pose", K.POSE),),
        params=(ParamSpec("marker_id", "text", required=True),),
        evaluator=eval_marker_tracking,
        description="Latest pose of a named tracked marker."))
    reg.register(NodeSpec(
        kind="GenerateSpatialAnchor", category="Processing/Sensor",
        inputs=(port("position", K.POSE),),
        outputs=(port("pose", K.POSE),),
        evaluator=eval_spatial_anchor,
        description="Persists a shared spatial anchor at a position."))
    reg.register(NodeSpec(
        kind="RawCapture", category="Processing/Sensor",
        inputs=(port("stream", K.STREAM_HANDLE),),
        outputs=(port("image", K.IMAGE2D), port("pose", K.POSE)),
        params=(ParamSpec("trigger", "text", default="latest"),
                ParamSpec("pinch_threshold", "number", default=0.015)),
        evaluator=eval_raw_capture,
        description="Captures the latest frame, or the frame at the last air tap."))
    reg.register(NodeSpec(
        kind="VisualEncoding", category="Processing/Encoding",
        inputs=(port("data", K.TABLE, K.MESH, K.VOLUME3D, K.IMAGE2D, K.POINTCLOUD),
                port("position", K.POSE, required=False)),
        outputs=(port("spec", K.VISSPEC),),
        params=(ParamSpec("mark", "text", required=True),
                ParamSpec("channels", "json", default=None),
                ParamSpec("coordinate_type", "text", default="view"),
                ParamSpec("scale", "number", default=1.0)),
        evaluator=eval_visual_encoding,
        description="Compiles data and encoding parameters into a spec."))
    reg.register(NodeSpec(
        kind="XRVisualization", category="Rendering",
        inputs=(port("spec", K.VISSPEC), port("device", K.DEVICE_KEY)),
        outputs=(port("status", K.TEXT),),
        evaluator=eval_xr_visualization,
        description="Queues a spec for delivery to a device."))
    return reg
