"""Typed payloads that flow along workflow edges.

A :class:`DataValue` is a kind tag plus a kind-specific payload. Pure node
outputs must serialize byte-identically across runs, so ``canonical_bytes``
defines one fixed encoding per kind (sorted-key JSON for structured parts,
little-endian arrays for bulk data) and ``content_hash`` derives the
data-store reference from it.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

import numpy as np

from .errors import ParseError
from .geometry import Pose

_MAGIC = b"XDV1"

NUMBER = "number"
TEXT = "text"
BOOLEAN = "boolean"


class DataKind(str, Enum):
    TABLE = "Table"
    IMAGE2D = "Image2D"
    VOLUME3D = "Volume3D"
    MESH = "Mesh"
    POINTCLOUD = "PointCloud"
    POSE = "Pose"
    VISSPEC = "VisSpec"
    DEVICE_KEY = "DeviceKey"
    STREAM_HANDLE = "StreamHandle"
    SCALAR = "Scalar"
    TEXT = "Text"


def _col_type(v) -> str:
    if isinstance(v, bool):
        return BOOLEAN
    if isinstance(v, (int, float)):
        return NUMBER
    if isinstance(v, str):
        return TEXT
    raise ParseError(f"unsupported cell value {v!r}; columns are number, text, or boolean")


@dataclass
class Table:
    """Homogeneous rows over one column schema."""

    columns: list
    types: dict
    rows: list

    def __post_init__(self):
        cols = list(self.columns)
        colset = set(cols)
        if len(colset) != len(cols):
            raise ParseError("duplicate column names")
        for name in cols:
            if self.types.get(name) not in (NUMBER, TEXT, BOOLEAN):
                raise ParseError(f"column {name!r} has no valid declared type")
        for row in self.rows:
            if set(row.keys()) != colset:
                raise ParseError("row keys do not match the column schema")
            for name in cols:
                if _col_type(row[name]) != self.types[name]:
                    raise ParseError(
                        f"cell {row[name]!r} does not match column {name!r} "
                        f"type {self.types[name]}")

    @staticmethod
    def from_records(records: list) -> "Table":
        if not records:
            return Table(columns=[], types={}, rows=[])
        columns = list(records[0].keys())
        types = {name: _col_type(records[0][name]) for name in columns}
        return Table(columns=columns, types=types, rows=[dict(r) for r in records])

    def column(self, name: str) -> list:
        if name not in self.types:
            raise KeyError(name)
        return [row[name] for row in self.rows]

    def to_jsonable(self) -> dict:
        return {"columns": self.columns, "types": self.types, "rows": self.rows}

    @staticmethod
    def from_jsonable(d: dict) -> "Table":
        return Table(columns=d["columns"], types=d["types"], rows=d["rows"])

    def __len__(self):
        return len(self.rows)


@dataclass
class Image2D:
    """2D raster. ``format`` is one of u8, u16, rgb8, rgba8.

    u16 images are depth maps in millimeters. ``meta`` optionally carries a
    pinhole camera model {fx, fy, cx, cy, depth_scale} and a capture pose
    (7-float wire list) for back-projection.
    """

    pixels: np.ndarray
    format: str
    meta: dict = field(default_factory=dict)

    _FORMATS = {"u8": ("<u1", 2), "u16": ("<u2", 2), "rgb8": ("<u1", 3), "rgba8": ("<u1", 3)}

    def __post_init__(self):
        if self.format not in self._FORMATS:
            raise ParseError(f"unknown image format {self.format!r}")
        dtype, ndim = self._FORMATS[self.format]
        px = np.asarray(self.pixels).astype(dtype)
        if px.ndim != ndim:
            raise ParseError(f"{self.format} image must have {ndim} dims, got {px.ndim}")
        if self.format == "rgb8" and px.shape[2] != 3:
            raise ParseError("rgb8 image must have 3 channels")
        if self.format == "rgba8" and px.shape[2] != 4:
            raise ParseError("rgba8 image must have 4 channels")
        self.pixels = px

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])


@dataclass
class Volume3D:
    """Scalar field on a regular grid.

    ``samples`` is flat, x-fastest: index = ix + nx * (iy + ny * iz). The
    world position of voxel (ix,iy,iz) is origin + index * spacing, i.e.
    ``origin`` is the center of voxel (0,0,0).
    """

    dims: tuple
    spacing: tuple
    origin: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        if len(self.dims) != 3 or any(d <= 0 for d in self.dims):
            raise ParseError("volume dims must be 3 positive integers")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ParseError("volume spacing must be 3 positive numbers")
        samples = np.asarray(self.samples)
        if samples.dtype.kind == "f":
            samples = samples.astype("<f4")
            if not np.isfinite(samples).all():
                raise ParseError("volume samples must be finite")
        elif samples.dtype == np.uint16:
            samples = samples.astype("<u2")
        else:
            samples = samples.astype("<u1")
        n = self.dims[0] * self.dims[1] * self.dims[2]
        if samples.size != n:
            raise ParseError(f"expected {n} samples, got {samples.size}")
        self.samples = samples.reshape(n)

    @property
    def dtype_name(self) -> str:
        return {"u1": "u8", "u2": "u16", "f4": "f32"}[self.samples.dtype.str[1:]]

    def grid(self) -> np.ndarray:
        """View shaped (nz, ny, nx) so [iz, iy, ix] indexes voxel (ix,iy,iz)."""
        nx, ny, nz = self.dims
        return self.samples.reshape(nz, ny, nx)

    def world_of_index(self, idx) -> np.ndarray:
        return self.origin + np.asarray(idx, dtype=np.float64) * np.asarray(self.spacing)

    def value_range(self):
        return float(self.samples.min()), float(self.samples.max())


@dataclass
class Mesh:
    """Indexed triangle mesh with optional unit normals and a vertex scalar field."""

    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None
    vertex_scalars: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        n = len(self.vertices)
        if self.triangles.size and (self.triangles.min() < 0 or self.triangles.max() >= n):
            raise ParseError("triangle index out of range")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(self.normals) != n:
                raise ParseError("need one normal per vertex")
            if n and np.abs(np.linalg.norm(self.normals, axis=1) - 1.0).max() > 1e-6:
                raise ParseError("normals must be unit length")
        if self.vertex_scalars is not None:
            self.vertex_scalars = np.asarray(self.vertex_scalars, dtype=np.float64).reshape(-1)
            if len(self.vertex_scalars) != n:
                raise ParseError("need one scalar per vertex")

    def counts(self):
        return len(self.vertices), len(self.triangles)


@dataclass
class PointCloud:
    points: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if self.points.size and not np.isfinite(self.points).all():
            raise ParseError("point coordinates must be finite")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
            if len(self.weights) != len(self.points):
                raise ParseError("need one weight per point")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class StreamHandle:
    """Names one device's sensor stream; resolved against the gateway hub."""

    device_key: str
    kind: str


@dataclass
class DataValue:
    kind: DataKind
    payload: Any

    # -- constructors ------------------------------------------------------
    @staticmethod
    def table(t: Table) -> "DataValue":
        return DataValue(DataKind.TABLE, t)

    @staticmethod
    def image(img: Image2D) -> "DataValue":
        return DataValue(DataKind.IMAGE2D, img)

    @staticmethod
    def volume(v: Volume3D) -> "DataValue":
        return DataValue(DataKind.VOLUME3D, v)

    @staticmethod
    def mesh(m: Mesh) -> "DataValue":
        return DataValue(DataKind.MESH, m)

    @staticmethod
    def cloud(c: PointCloud) -> "DataValue":
        return DataValue(DataKind.POINTCLOUD, c)

    @staticmethod
    def pose(p: Pose) -> "DataValue":
        return DataValue(DataKind.POSE, p)

    @staticmethod
    def scalar(x) -> "DataValue":
        return DataValue(DataKind.SCALAR, float(x))

    @staticmethod
    def text(s: str) -> "DataValue":
        return DataValue(DataKind.TEXT, str(s))

    @staticmethod
    def device_key(k: str) -> "DataValue":
        return DataValue(DataKind.DEVICE_KEY, str(k))

    @staticmethod
    def stream(h: StreamHandle) -> "DataValue":
        return DataValue(DataKind.STREAM_HANDLE, h)

    @staticmethod
    def vis_spec(spec) -> "DataValue":
        return DataValue(DataKind.VISSPEC, spec)


def _json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _pack(kind: DataKind, header: dict, blob: bytes = b"") -> bytes:
    k = kind.value.encode("ascii")
    h = _json_bytes(header)
    return _MAGIC + struct.pack("<B", len(k)) + k + struct.pack("<I", len(h)) + h + blob


def canonical_bytes(value: DataValue) -> bytes:
    """Deterministic encoding of a DataValue; equal values encode equally."""
    kind, p = value.kind, value.payload
    if kind == DataKind.TABLE:
        return _pack(kind, p.to_jsonable())
    if kind == DataKind.SCALAR:
        return _pack(kind, {"value": float(p)})
    if kind in (DataKind.TEXT, DataKind.DEVICE_KEY):
        return _pack(kind, {"value": str(p)})
    if kind == DataKind.POSE:
        return _pack(kind, {"pose": p.to_floats()})
    if kind == DataKind.VISSPEC:
        return _pack(kind, p.to_wire())
    if kind == DataKind.VOLUME3D:
        header = {
            "dims": list(p.dims),
            "spacing": list(p.spacing),
            "origin": [float(v) for v in p.origin],
            "dtype": p.dtype_name,
        }
        return _pack(kind, header, p.samples.tobytes())
    if kind == DataKind.MESH:
        blob = (p.vertices.astype("<f4").tobytes()
                + p.triangles.astype("<u4").tobytes())
        if p.normals is not None:
            blob += p.normals.astype("<f4").tobytes()
        if p.vertex_scalars is not None:
            blob += p.vertex_scalars.astype("<f4").tobytes()
        header = {
            "nv": len(p.vertices),
            "nt": len(p.triangles),
            "has_normals": p.normals is not None,
            "has_scalars": p.vertex_scalars is not None,
        }
        return _pack(kind, header, blob)
    if kind == DataKind.POINTCLOUD:
        blob = p.points.astype("<f4").tobytes()
        if p.weights is not None:
            blob += p.weights.astype("<f4").tobytes()
        return _pack(kind, {"n": len(p), "has_weights": p.weights is not None}, blob)
    if kind == DataKind.IMAGE2D:
        header = {"width": p.width, "height": p.height, "format": p.format,
                  "meta": p.meta}
        return _pack(kind, header, np.ascontiguousarray(p.pixels).tobytes())
    raise ParseError(f"values of kind {kind.value} have no canonical encoding")


def parse_bytes(data: bytes) -> DataValue:
    """Inverse of canonical_bytes."""
    if len(data) < 9 or data[:4] != _MAGIC:
        raise ParseError("bad value encoding: magic mismatch")
    klen = data[4]
    kind_name = data[5:5 + klen].decode("ascii")
    off = 5 + klen
    (hlen,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    blob = data[off + hlen:]
    kind = DataKind(kind_name)
    if kind == DataKind.TABLE:
        return DataValue.table(Table.from_jsonable(header))
    if kind == DataKind.SCALAR:
        return DataValue.scalar(header["value"])
    if kind == DataKind.TEXT:
        return DataValue.text(header["value"])
    if kind == DataKind.DEVICE_KEY:
        return DataValue.device_key(header["value"])
    if kind == DataKind.POSE:
        return DataValue.pose(Pose.from_floats(header["pose"]))
    if kind == DataKind.VISSPEC:
        from .grammar import VisSpec
        return DataValue.vis_spec(VisSpec.from_wire(header))
    if kind == DataKind.VOLUME3D:
        dtype = {"u8": "<u1", "u16": "<u2", "f32": "<f4"}[header["dtype"]]
        samples = np.frombuffer(blob, dtype=dtype)
        return DataValue.volume(Volume3D(dims=header["dims"], spacing=header["spacing"],
                                         origin=header["origin"], samples=samples))
    if kind == DataKind.MESH:
        nv, nt = header["nv"], header["nt"]
        off = 0
        verts = np.frombuffer(blob, dtype="<f4", count=nv * 3, offset=off).reshape(nv, 3)
        off += nv * 12
        tris = np.frombuffer(blob, dtype="<u4", count=nt * 3, offset=off).reshape(nt, 3)
        off += nt * 12
        normals = scalars = None
        if header["has_normals"]:
            normals = np.frombuffer(blob, dtype="<f4", count=nv * 3, offset=off).reshape(nv, 3)
            off += nv * 12
        if header["has_scalars"]:
            scalars = np.frombuffer(blob, dtype="<f4", count=nv, offset=off)
        return DataValue.mesh(Mesh(vertices=verts, triangles=tris,
                                   normals=normals, vertex_scalars=scalars))
    if kind == DataKind.POINTCLOUD:
        n = header["n"]
        pts = np.frombuffer(blob, dtype="<f4", count=n * 3).reshape(n, 3)
        weights = None
        if header["has_weights"]:
            weights = np.frombuffer(blob, dtype="<f4", count=n, offset=n * 12)
        return DataValue.cloud(PointCloud(points=pts, weights=weights))
    if kind == DataKind.IMAGE2D:
        fmt = header["format"]
        dtype, ndim = Image2D._FORMATS[fmt]
        shape = (header["height"], header["width"])
        if ndim == 3:
            shape += (3 if fmt == "rgb8" else 4,)
        pixels = np.frombuffer(blob, dtype=dtype).reshape(shape)
        return DataValue.image(Image2D(pixels=pixels, format=fmt,
                                       meta=header.get("meta") or {}))
    raise ParseError(f"cannot parse values of kind {kind_name}")


def content_hash(value: DataValue) -> str:
    return hashlib.sha256(canonical_bytes(value)).hexdigest()
