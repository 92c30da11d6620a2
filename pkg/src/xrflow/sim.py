"""A headless stand-in for the XR device.

It speaks only the public protocol: the credential handshake, task polling,
the spec wire format, and the TCP sensor framing. It knows nothing about
nodes or workflows, mirroring a real viewer app.

Two clocks exist. ``run_realtime`` paces itself against the wall clock;
the scenario runner instead calls ``advance(sim_t)`` in lock step with a
simulated clock, which makes every run bit-identical.
"""
from __future__ import annotations

import json
import socket
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import requests

from .errors import (
    DanglingLink,
    FlowError,
    HandshakeFailed,
    MalformedSpec,
    OutOfTrackRange,
    ServerUnreachable,
)
from .geometry import Pose, Similarity, quat_nlerp
from .grammar import VisSpec, parse_spec, resolve_link
from .streams import (
    color_payload,
    depth_payload,
    encode_frame,
    handjoints_payload,
    pose_payload,
)

HTTP_TIMEOUT = 10.0
IDLE_HAND_GAP = 0.08      # metres between thumb and index when not pinching
TAP_GAP = 0.004           # gap while a scripted air tap is held
TAP_HOLD = 0.08           # seconds a scripted tap stays pinched


class PoseTrack:
    """Piecewise pose track: linear translation, shortest-arc nlerp rotation."""

    def __init__(self, keys):
        if not keys:
            raise ValueError("a track needs at least one key")
        self.keys = sorted(((float(t), pose) for t, pose in keys),
                           key=lambda kv: kv[0])

    @staticmethod
    def constant(pose: Pose) -> "PoseTrack":
        return PoseTrack([(0.0, pose)])

    @staticmethod
    def from_wire(entries) -> "PoseTrack":
        return PoseTrack([(t, Pose.from_floats(vals)) for t, vals in entries])

    def sample(self, t: float) -> Pose:
        keys = self.keys
        if len(keys) == 1:
            return keys[0][1]
        if t < keys[0][0] - 1e-9 or t > keys[-1][0] + 1e-9:
            raise OutOfTrackRange(
                f"t={t:.3f} outside track [{keys[0][0]:.3f}, {keys[-1][0]:.3f}]")
        for (t0, p0), (t1, p1) in zip(keys, keys[1:]):
            if t <= t1:
                if t1 - t0 < 1e-12:
                    return p1
                a = (max(t, t0) - t0) / (t1 - t0)
                return Pose(quat=quat_nlerp(p0.quat, p1.quat, a),
                            translation=(1 - a) * p0.translation
                            + a * p1.translation)
        return keys[-1][1]


@dataclass
class ScriptAction:
    t: float
    action: str
    args: dict = field(default_factory=dict)


class Scenario:
    """Parsed scenario file: sensor tracks plus a timed action script."""

    def __init__(self, raw: dict):
        self.name = raw.get("name", "scenario")
        self.duration = float(raw.get("duration", 1.0))
        self.poll_interval = float(raw.get("poll_interval", 0.1))
        self.frame_rate = float(raw.get("frame_rate", 60.0))
        self.connector = raw.get("connector")          # workflow node to bind
        self.server_script = list(raw.get("server_script") or [])
        self.tracks: dict = {}
        for kind, trk in (raw.get("streams") or {}).items():
            self.tracks[kind] = PoseTrack.from_wire(trk["track"])
        self.script = [ScriptAction(float(s["t"]), s["action"],
                                    {k: v for k, v in s.items()
                                     if k not in ("t", "action")})
                       for s in (raw.get("script") or [])]
        self.script.sort(key=lambda s: s.t)
        times = [s.t for s in self.script]
        if times != sorted(times):
            raise ValueError("script times must be non-decreasing")

    @staticmethod
    def load(path) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return Scenario(json.load(fh))

    def stream_kinds(self) -> list:
        kinds = sorted(self.tracks)
        # scripted air taps imply a hand stream even without a track
        if any(s.action == "air_tap" for s in self.script):
            if "HandJoints" not in kinds:
                kinds.append("HandJoints")
        return kinds


class SimScene:
    """Placed specs with resolved world transforms; pure function of tasks."""

    def __init__(self):
        self.placed: dict = {}      # spec_id -> {"spec", "world", "payload", ...}
        self.markers: dict = {}     # marker_id -> Pose
        self.failed_tasks: list = []
        self.deferred: dict = {}    # spec_id -> payload waiting on a link target

    def _specs_by_id(self) -> dict:
        return {sid: entry["spec"] for sid, entry in self.placed.items()}

    def _reresolve(self) -> None:
        registry = self._specs_by_id()
        for sid, entry in self.placed.items():
            entry["world"] = resolve_link(entry["spec"], registry)

    def _place(self, payload: str, fetch=None) -> VisSpec:
        spec = parse_spec(payload)        # MalformedSpec propagates
        registry = self._specs_by_id()
        registry[spec.spec_id] = spec
        world = resolve_link(spec, registry)  # DanglingLink propagates
        data = fetch(spec.data_ref) if fetch else None
        self.placed[spec.spec_id] = {"spec": spec, "world": world,
                                     "payload": payload, "data": data}
        self._reresolve()
        return spec

    def _retry_deferred(self, fetch=None) -> None:
        # a new placement may satisfy links that dangled earlier
        progress = True
        while progress and self.deferred:
            progress = False
            for sid, payload in list(self.deferred.items()):
                try:
                    self._place(payload, fetch)
                except DanglingLink:
                    continue
                del self.deferred[sid]
                progress = True

    def apply_task(self, task: dict, fetch=None) -> None:
        kind = task.get("kind")
        if kind == "ClearScene":
            self.placed.clear()
            self.deferred.clear()
            return
        if kind != "RenderSpec":
            raise MalformedSpec(f"device cannot apply task kind {kind!r}")
        payload = task["payload"]
        try:
            self._place(payload, fetch)
        except DanglingLink:
            # hold the spec until its link target arrives
            self.deferred[parse_spec(payload).spec_id] = payload
            raise
        self.deferred.pop(parse_spec(payload).spec_id, None)
        self._retry_deferred(fetch)

    def snapshot(self) -> dict:
        out = {}
        for sid, entry in sorted(self.placed.items()):
            world: Similarity = entry["world"]
            out[sid] = {
                "mark": entry["spec"].mark,
                "payload": entry["payload"],
                "world": world.to_wire(),
                "data_kind": entry["data"][0] if entry["data"] else None,
                "data_bytes": len(entry["data"][1]) if entry["data"] else 0,
            }
        return out


class SimDevice:
    """One simulated device: handshake, streams, polling, scene."""

    def __init__(self, server: str, scenario: Scenario,
                 name: str = "device", auto_connect: bool = True,
                 clock=None, fetch_data: bool = True,
                 wall_times: bool = True,
                 session: Optional[requests.Session] = None):
        self.server = server.rstrip("/")
        self.scenario = scenario
        self.name = name
        self.auto_connect = auto_connect
        self.clock = clock or time.time
        self.fetch_data = fetch_data
        self.wall_times = wall_times  # False keeps logs replay-identical
        self.http = session or requests.Session()
        self.log: list = []
        self.scene = SimScene()
        self.credentials: Optional[dict] = None
        self.device_key: Optional[str] = None
        self.poll_interval = scenario.poll_interval
        self.sent_frames: list = []
        self.sent_count: dict = {}     # kind -> frames pushed on the socket
        self._sock: Optional[socket.socket] = None
        self._last_emit: dict = {}
        self._next_poll = 0.0
        self._script_done = 0
        self._tap_until = -1.0
        self._tap_pos = np.zeros(3)
        self._frame_seq = 0
        self.expect_failures: list = []
        self._deferred_expects: list = []

    # ------------------------------------------------------------- logging
    def _log(self, event: str, **extra) -> dict:
        entry = {"t": round(float(self.clock()), 6), "event": event,
                 "device": self.name}
        entry.update(extra)
        self.log.append(entry)
        return entry

    # ---------------------------------------------------------------- http
    def _post(self, path: str, body: dict) -> dict:
        try:
            r = self.http.post(self.server + path, json=body,
                               timeout=HTTP_TIMEOUT)
        except requests.RequestException as e:
            raise ServerUnreachable(f"POST {path}: {e}") from e
        if r.status_code >= 400:
            raise HandshakeFailed(f"POST {path} -> {r.status_code}: {r.text}")
        return r.json()

    def _get(self, path: str):
        try:
            return self.http.get(self.server + path, timeout=HTTP_TIMEOUT)
        except requests.RequestException as e:
            raise ServerUnreachable(f"GET {path}: {e}") from e

    # ----------------------------------------------------------- handshake
    def request_credentials(self) -> dict:
        self._log("request")
        self.credentials = self._post("/api/device/request", {})
        self._log("credentials", username=self.credentials["username"])
        return self.credentials

    def connect(self) -> str:
        if self.credentials is None:
            raise HandshakeFailed("request credentials before connecting")
        self._log("connect", username=self.credentials["username"])
        reply = self._post("/api/device/connect",
                           {"username": self.credentials["username"],
                            "password": self.credentials["password"]})
        self.device_key = reply["device_key"]
        self.poll_interval = reply.get("poll_interval_ms",
                                       self.poll_interval * 1000) / 1000.0
        if self.scenario.poll_interval:
            self.poll_interval = self.scenario.poll_interval
        self._stream_endpoint = reply.get("stream")
        if reply.get("scheduler") == "created":
            self._log("scheduler_created", device_key=self.device_key)
        return self.device_key

    def open_streams(self) -> None:
        kinds = self.scenario.stream_kinds()
        if not kinds:
            return
        reply = self._post(f"/api/device/{self.device_key}/stream",
                           {"kinds": kinds})
        self._sock = socket.create_connection((reply["host"], reply["port"]),
                                              timeout=HTTP_TIMEOUT)
        self._log("stream_open", kinds=kinds)

    def start(self) -> None:
        """Handshake; in auto mode also connect and open streams."""
        self.request_credentials()
        if self.auto_connect:
            self.connect()
            self.open_streams()

    def finish_connect(self) -> None:
        """Second handshake phase, once the harness has relayed credentials."""
        self.connect()
        self.open_streams()

    # ------------------------------------------------------------- streams
    def _emit_frame(self, kind: str, t: float) -> None:
        if kind == "HandJoints":
            if t <= self._tap_until:
                half = np.array([TAP_GAP / 2.0, 0.0, 0.0])
                thumb = Pose(translation=self._tap_pos - half)
                index = Pose(translation=self._tap_pos + half)
            else:
                track = self.scenario.tracks.get("HandJoints")
                base = track.sample(t) if track else Pose.identity()
                thumb = base
                index = Pose(quat=base.quat,
                             translation=base.translation
                             + np.array([IDLE_HAND_GAP, 0.0, 0.0]))
            binary = handjoints_payload(thumb, index)
        elif kind in ("DepthFrame", "ColorFrame"):
            return  # frame streams are scripted via send_image, not tracks
        else:
            track = self.scenario.tracks.get(kind)
            if track is None:
                return
            binary = pose_payload(track.sample(t))
        self._send(kind, t, binary)

    def _send(self, kind: str, t: float, binary: bytes, **header_extra) -> None:
        if self._sock is None:
            return
        self._frame_seq += 1
        frame = encode_frame(self.device_key, kind, round(float(t), 9), binary,
                             extra=header_extra or None)
        self._sock.sendall(frame)
        self.sent_frames.append(frame)
        self.sent_count[kind] = self.sent_count.get(kind, 0) + 1

    def send_image(self, kind: str, t: float, image, pose: Optional[Pose] = None,
                   camera: Optional[dict] = None) -> None:
        """Push one depth or color frame (used by scripted captures)."""
        binary = depth_payload(image) if kind == "DepthFrame" else color_payload(image)
        extra = {}
        if pose is not None:
            extra["pose"] = pose.to_floats()
        if camera is not None:
            extra["camera"] = camera
        self._send(kind, t, binary, **extra)

    def send_marker(self, marker_id: str, t: float, pose: Pose) -> None:
        self.scene.markers[marker_id] = pose
        self._send("MarkerPose", t, pose_payload(pose), marker_id=marker_id)

    # -------------------------------------------------------------- polling
    def _fetch_ref(self, ref: str):
        if not self.fetch_data or not ref:
            return None
        r = self._get(f"/api/data/{ref}")
        if r.status_code >= 400:
            raise DanglingLink(f"data_ref {ref!r} -> HTTP {r.status_code}")
        return (r.headers.get("X-Data-Kind", ""), r.content)

    def poll_once(self) -> Optional[dict]:
        r = self._get(f"/api/device/{self.device_key}/poll")
        if r.status_code >= 400:
            raise ServerUnreachable(f"poll -> {r.status_code}: {r.text}")
        task = r.json()
        if task.get("status") == "empty":
            self._log("poll_empty")
            return None
        self._log("poll_task", task_id=task.get("task_id"),
                  kind=task.get("kind"))
        try:
            self.scene.apply_task(task, fetch=self._fetch_ref)
        except DanglingLink as e:
            self._log("spec_deferred", task_id=task.get("task_id"),
                      reason=str(e))
            return task
        except FlowError as e:
            self.scene.failed_tasks.append((task.get("task_id"), str(e)))
            self._log("task_failed", task_id=task.get("task_id"),
                      error=f"{type(e).__name__}: {e}")
            return task
        if task.get("kind") == "RenderSpec":
            spec_id = parse_spec(task["payload"]).spec_id
            timing = ({"applied_at": time.time(),
                       "enqueued_at": task.get("enqueued_at")}
                      if self.wall_times else {})
            self._log("spec_applied", task_id=task.get("task_id"),
                      spec_id=spec_id, **timing)
        else:
            self._log("task_applied", task_id=task.get("task_id"),
                      kind=task.get("kind"))
        return task

    # --------------------------------------------------------------- script
    def _run_action(self, step: ScriptAction) -> None:
        if step.action == "advance_clock":
            return  # time is driven by advance(); kept for scenario clarity
        if step.action == "air_tap":
            self._tap_pos = np.array(step.args["position"], dtype=np.float64)
            self._tap_until = step.t + TAP_HOLD
            self._log("air_tap", position=list(map(float, self._tap_pos)))
            return
        if step.action == "move_marker":
            pose = Pose.from_floats(step.args["pose"])
            self.send_marker(step.args["marker_id"], step.t, pose)
            self._log("marker_moved", marker_id=step.args["marker_id"])
            return
        if step.action == "send_depth":
            # depth payload baked into the scenario as a flat list
            args = step.args
            img = np.array(args["data"], dtype=np.uint16).reshape(
                args["height"], args["width"])
            pose = Pose.from_floats(args["pose"]) if "pose" in args else None
            self.send_image("DepthFrame", step.t, img, pose=pose,
                            camera=args.get("camera"))
            self._log("depth_sent", width=args["width"], height=args["height"])
            return
        if step.action == "expect_spec":
            if not self._check_expect(step.args):
                self._deferred_expects.append(step)
            return
        raise ValueError(f"unknown scenario action {step.action!r}")

    def _check_expect(self, args: dict) -> bool:
        sid = args.get("spec_id")
        entry = self.scene.placed.get(sid)
        if args.get("absent"):
            return entry is None
        if entry is None:
            return False
        if "mark" in args and entry["spec"].mark != args["mark"]:
            return False
        if "translation" in args:
            want = np.array(args["translation"], dtype=np.float64)
            got = entry["world"].translation
            if np.abs(got - want).max() > float(args.get("tol", 1e-6)):
                return False
        if "link_kind" in args:
            link = entry["spec"].link
            if link is None or link.kind != args["link_kind"]:
                return False
        if "min_data_bytes" in args:
            data = entry.get("data")
            if data is None or len(data[1]) < int(args["min_data_bytes"]):
                return False
        return True

    def settle_expectations(self) -> None:
        """Re-check deferred expectations once, at scenario end."""
        still = []
        for step in self._deferred_expects:
            if not self._check_expect(step.args):
                still.append(step)
        for step in still:
            self.expect_failures.append(
                {"t": step.t, "expect": step.args})
            self._log("expect_failed", expect=step.args)
        self._deferred_expects = []

    # ------------------------------------------------------------- stepping
    def advance(self, now: float) -> None:
        """Emit frames, run script, poll: everything due up to sim time now."""
        for kind in self.scenario.stream_kinds():
            if kind in ("DepthFrame", "ColorFrame"):
                continue
            period = 1.0 / self.scenario.frame_rate
            t = self._last_emit.get(kind)
            t = 0.0 if t is None else t + period
            while t <= now + 1e-9:
                self._emit_frame(kind, t)
                self._last_emit[kind] = t
                t += period
        while (self._script_done < len(self.scenario.script)
               and self.scenario.script[self._script_done].t <= now + 1e-9):
            self._run_action(self.scenario.script[self._script_done])
            self._script_done += 1
        while self._next_poll <= now + 1e-9:
            if self.device_key is not None:
                self.poll_once()
            self._next_poll += self.poll_interval

    def run_realtime(self, duration: Optional[float] = None) -> None:
        duration = self.scenario.duration if duration is None else duration
        self.start()
        t0 = time.monotonic()
        now = 0.0
        while now <= duration:
            self.advance(now)
            time.sleep(min(self.poll_interval, 1.0 / self.scenario.frame_rate))
            now = time.monotonic() - t0
        self.drain()

    def drain(self, polls: int = 2) -> None:
        """Final polls so late tasks still land, then settle expectations."""
        for _ in range(polls):
            if self.device_key is not None:
                while self.poll_once() is not None:
                    pass
        self.settle_expectations()

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self.log:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")


def fetch_anchors(server: str, code: str) -> list:
    """Shared spatial anchors of a workspace, as the device would fetch them."""
    r = requests.get(f"{server.rstrip('/')}/api/workspace/{code}",
                     timeout=HTTP_TIMEOUT)
    r.raise_for_status()
    return r.json().get("anchors", [])
