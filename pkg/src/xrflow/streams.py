"""TCP sensor streaming: frame codec and the server-side hub.

Wire format, per frame: a 4-byte little-endian payload length, then the
payload, which is a JSON header {device_key, kind, timestamp, payload_bytes}
followed by exactly payload_bytes of binary. Binary layouts:

    pose kinds   7 x f32 LE [qx, qy, qz, qw, tx, ty, tz]
    HandJoints   two pose records back to back (thumb tip, index tip)
    DepthFrame   u32 width, u32 height, then u16 millimeters row-major
    ColorFrame   u32 width, u32 height, u32 channels, then u8 samples

Depth headers may carry extra JSON fields (camera intrinsics, capture pose);
MarkerPose headers carry marker_id. Timestamps must strictly increase per
(device_key, kind); violating frames are dropped and counted, never
reordered.
"""
from __future__ import annotations

import json
import logging
import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import StreamAlreadyOpen, UnknownDevice
from .geometry import Pose
from .values import Image2D

log = logging.getLogger(__name__)

SENSOR_KINDS = ("HeadPose", "EyeGaze", "HandJoints", "DepthFrame", "ColorFrame",
                "MarkerPose")
POSE_KINDS = ("HeadPose", "EyeGaze", "MarkerPose")

RETAIN = 4096  # per-(device, kind) record retention; readers window over this


# ------------------------------------------------------------------- codec

def encode_frame(device_key: str, kind: str, timestamp: float,
                 payload: bytes = b"", extra: Optional[dict] = None) -> bytes:
    header = {"device_key": device_key, "kind": kind,
              "timestamp": float(timestamp), "payload_bytes": len(payload)}
    if extra:
        header.update(extra)
    body = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = body + payload
    return struct.pack("<I", len(payload)) + payload


def decode_frame(payload: bytes):
    """Split one frame payload (no length prefix) into (header, binary).

    The header is ASCII JSON at the front, so its end is where the first
    JSON value stops; anything after it is the binary body.
    """
    prefix = payload[:16384].decode("ascii", errors="replace")
    try:
        header, end = json.JSONDecoder().raw_decode(prefix)
    except json.JSONDecodeError as e:
        raise ValueError(f"frame has no leading JSON header: {e}") from e
    if not isinstance(header, dict):
        raise ValueError("frame header must be a JSON object")
    binary = payload[end:]
    if header.get("payload_bytes") != len(binary):
        raise ValueError("frame header does not match its payload length")
    return header, binary


def pose_payload(pose: Pose) -> bytes:
    return struct.pack("<7f", *pose.to_floats())


def decode_pose(payload: bytes) -> Pose:
    return Pose.from_floats(struct.unpack("<7f", payload[:28]))


def handjoints_payload(thumb_tip: Pose, index_tip: Pose) -> bytes:
    return pose_payload(thumb_tip) + pose_payload(index_tip)


def decode_handjoints(payload: bytes):
    return decode_pose(payload[:28]), decode_pose(payload[28:56])


def depth_payload(depth_mm: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(depth_mm, dtype="<u2")
    h, w = arr.shape
    return struct.pack("<II", w, h) + arr.tobytes()


def decode_depth(payload: bytes) -> np.ndarray:
    w, h = struct.unpack_from("<II", payload, 0)
    return np.frombuffer(payload, dtype="<u2", count=w * h, offset=8).reshape(h, w)


def color_payload(rgb: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(rgb, dtype="<u1")
    h, w, c = arr.shape
    return struct.pack("<III", w, h, c) + arr.tobytes()


def decode_color(payload: bytes) -> np.ndarray:
    w, h, c = struct.unpack_from("<III", payload, 0)
    return np.frombuffer(payload, dtype="<u1", count=w * h * c, offset=12).reshape(h, w, c)


def read_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def read_frame(sock: socket.socket):
    head = read_exact(sock, 4)
    if head is None:
        return None
    (length,) = struct.unpack("<I", head)
    payload = read_exact(sock, length)
    if payload is None:
        return None
    return payload


@dataclass
class StreamRecord:
    timestamp: float
    kind: str
    header: dict
    value: object          # decoded payload, kind-specific
    raw: bytes             # full frame bytes as received (with length prefix)


@dataclass
class _StreamState:
    open_kinds: set = field(default_factory=set)
    last_ts: dict = field(default_factory=dict)        # kind -> last timestamp
    records: dict = field(default_factory=dict)        # kind -> deque
    rejected: dict = field(default_factory=dict)       # kind -> count
    received: dict = field(default_factory=dict)       # kind -> count
    markers: dict = field(default_factory=dict)        # marker_id -> (ts, Pose)


class StreamHub:
    """Accepts device TCP connections and fans decoded frames out.

    One listener serves every device; frames self-identify through their
    header. Closing a connection clears the open-kind state for that device
    but keeps the session and the already-received records intact.
    """

    def __init__(self, session_lookup=None, host: str = "127.0.0.1"):
        self._lookup = session_lookup or (lambda key: True)
        self.host = host
        self.port = None
        self._lock = threading.RLock()
        self._devices: dict = {}
        self._subscribers: list = []
        self._server_sock: Optional[socket.socket] = None
        self._threads: list = []
        self._conn_kinds: dict = {}
        self._stopping = False

    # ---------------------------------------------------------- lifecycle
    def start(self) -> None:
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.host, 0))
        sock.listen(32)
        self._server_sock = sock
        self.port = sock.getsockname()[1]
        t = threading.Thread(target=self._accept_loop, name="stream-hub", daemon=True)
        t.start()
        self._threads.append(t)

    def stop(self) -> None:
        self._stopping = True
        if self._server_sock is not None:
            try:
                self._server_sock.close()
            except OSError:
                pass
        for t in self._threads:
            t.join(timeout=2)

    def _accept_loop(self) -> None:
        while not self._stopping:
            try:
                conn, _ = self._server_sock.accept()
            except OSError:
                return
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_conn(self, conn: socket.socket) -> None:
        key_seen = set()
        try:
            while True:
                payload = read_frame(conn)
                if payload is None:
                    break
                raw = struct.pack("<I", len(payload)) + payload
                try:
                    header, binary = decode_frame(payload)
                except ValueError as e:
                    log.warning("dropping undecodable frame: %s", e)
                    continue
                key = header.get("device_key")
                if key:
                    key_seen.add(key)
                self.ingest(header, binary, raw)
        except OSError:
            pass
        finally:
            conn.close()
            # stream teardown: open-kind markers reset, records kept
            with self._lock:
                for key in key_seen:
                    state = self._devices.get(key)
                    if state is not None:
                        state.open_kinds.clear()

    # ------------------------------------------------------------ control
    def open_stream(self, device_key: str, kinds) -> dict:
        if not self._lookup(device_key):
            raise UnknownDevice(f"no live session {device_key!r}")
        kinds = list(kinds)
        for kind in kinds:
            if kind not in SENSOR_KINDS:
                raise ValueError(f"unknown sensor kind {kind!r}")
        with self._lock:
            state = self._devices.setdefault(device_key, _StreamState())
            already = [k for k in kinds if k in state.open_kinds]
            if already:
                raise StreamAlreadyOpen(
                    f"stream kinds {already} already open for this device")
            state.open_kinds.update(kinds)
        return {"host": self.host, "port": self.port}

    def drop_device(self, device_key: str) -> None:
        with self._lock:
            self._devices.pop(device_key, None)

    # ------------------------------------------------------------- ingest
    def ingest(self, header: dict, binary: bytes, raw: bytes) -> None:
        try:
            key = header["device_key"]
            kind = header["kind"]
            ts = float(header["timestamp"])
        except (KeyError, TypeError, ValueError):
            log.warning("dropping frame with an incomplete header")
            return
        if kind not in SENSOR_KINDS or not self._lookup(key):
            log.warning("dropping frame for unknown stream (%s, %s)", key, kind)
            return
        with self._lock:
            state = self._devices.setdefault(key, _StreamState())
            last = state.last_ts.get(kind)
            if last is not None and ts <= last:
                state.rejected[kind] = state.rejected.get(kind, 0) + 1
                return
            try:
                value = self._decode_value(kind, binary)
            except Exception as e:
                state.rejected[kind] = state.rejected.get(kind, 0) + 1
                log.warning("dropping undecodable %s frame: %s", kind, e)
                return
            state.last_ts[kind] = ts
            rec = StreamRecord(timestamp=ts, kind=kind, header=header,
                               value=value, raw=raw)
            state.records.setdefault(kind, deque(maxlen=RETAIN)).append(rec)
            state.received[kind] = state.received.get(kind, 0) + 1
            if kind == "MarkerPose":
                mid = header.get("marker_id")
                if mid:
                    state.markers[mid] = (ts, value)
            subscribers = list(self._subscribers)
        for fn in subscribers:
            try:
                fn(key, rec)
            except Exception:
                log.exception("stream subscriber failed")

    @staticmethod
    def _decode_value(kind: str, binary: bytes):
        if kind in POSE_KINDS:
            return decode_pose(binary)
        if kind == "HandJoints":
            return decode_handjoints(binary)
        if kind == "DepthFrame":
            return decode_depth(binary)
        if kind == "ColorFrame":
            return decode_color(binary)
        raise ValueError(f"no decoder for {kind!r}")

    # -------------------------------------------------------------- reads
    def subscribe(self, fn) -> None:
        with self._lock:
            self._subscribers.append(fn)

    def window(self, device_key: str, kind: str, n: int) -> list:
        """Snapshot of the most recent n records, oldest first."""
        with self._lock:
            state = self._devices.get(device_key)
            if state is None:
                return []
            records = state.records.get(kind)
            if not records:
                return []
            items = list(records)
        return items[-int(n):] if n is not None else items

    def latest(self, device_key: str, kind: str) -> Optional[StreamRecord]:
        items = self.window(device_key, kind, 1)
        return items[0] if items else None

    def latest_marker(self, device_key: str, marker_id: str):
        with self._lock:
            state = self._devices.get(device_key)
            if state is None:
                return None
            return state.markers.get(marker_id)

    def received_count(self, device_key: str, kind: str) -> int:
        with self._lock:
            state = self._devices.get(device_key)
            return 0 if state is None else state.received.get(kind, 0)

    def rejected_count(self, device_key: str, kind: str) -> int:
        with self._lock:
            state = self._devices.get(device_key)
            return 0 if state is None else state.rejected.get(kind, 0)

    def is_open(self, device_key: str, kind: str) -> bool:
        with self._lock:
            state = self._devices.get(device_key)
            return state is not None and kind in state.open_kinds


def records_to_rows(kind: str, records: list) -> list:
    """Tabular view of stream records for data-queue nodes."""
    rows = []
    for rec in records:
        if kind in POSE_KINDS:
            q = rec.value.quat
            t = rec.value.translation
            row = {"timestamp": rec.timestamp,
                   "qx": float(q[0]), "qy": float(q[1]), "qz": float(q[2]),
                   "qw": float(q[3]),
                   "tx": float(t[0]), "ty": float(t[1]), "tz": float(t[2])}
            if kind == "MarkerPose":
                row["marker_id"] = str(rec.header.get("marker_id", ""))
        elif kind == "HandJoints":
            thumb, index = rec.value
            gap = float(np.linalg.norm(thumb.translation - index.translation))
            row = {"timestamp": rec.timestamp,
                   "thumb_x": float(thumb.translation[0]),
                   "thumb_y": float(thumb.translation[1]),
                   "thumb_z": float(thumb.translation[2]),
                   "index_x": float(index.translation[0]),
                   "index_y": float(index.translation[1]),
                   "index_z": float(index.translation[2]),
                   "pinch": gap}
        elif kind in ("DepthFrame", "ColorFrame"):
            arr = rec.value
            row = {"timestamp": rec.timestamp,
                   "width": int(arr.shape[1]), "height": int(arr.shape[0])}
        else:
            row = {"timestamp": rec.timestamp}
        rows.append(row)
    return rows


def record_image(rec: StreamRecord) -> Image2D:
    """Image2D from a depth or color stream record, metadata attached."""
    meta = {}
    for key in ("camera", "pose"):
        if key in rec.header:
            meta[key] = rec.header[key]
    meta["timestamp"] = rec.timestamp
    if rec.kind == "DepthFrame":
        return Image2D(pixels=rec.value, format="u16", meta=meta)
    arr = rec.value
    fmt = "rgba8" if arr.shape[2] == 4 else "rgb8"
    return Image2D(pixels=arr, format=fmt, meta=meta)
