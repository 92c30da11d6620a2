"""Declarative visualization specs and link resolution.

A VisSpec pairs a content-hash data reference with a mark, channel
encodings, a coordinate type, and a world transform. Specs are immutable
values; interactions return modified copies. The wire format is JSON with
sorted keys, so equal specs serialize byte-identically.

Placement links come in three kinds: TargetLink anchors a spec at a world
point, AxisLink maps a spec's positional axis onto another spec's axis for a
shared data field (equal domain values land on equal world points), and
ObjectLink groups a spec under another spec's transform.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    DanglingLink,
    EmptyData,
    MalformedSpec,
    MarkDataMismatch,
    SharedFieldMissing,
    UnknownField,
    UnknownSchemaVersion,
)
from .geometry import Similarity, shortest_arc
from .values import BOOLEAN, NUMBER, DataKind, DataValue, Table

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

MARKS = ("point", "bar", "line", "image", "mesh", "volume", "text")
CHANNELS = ("x", "y", "z", "color", "size", "text", "opacity")
POSITIONAL = ("x", "y", "z")

# fixed ordinal palette; these bytes are part of the wire contract
PALETTE10 = ("#4c78a8", "#f58518", "#e45756", "#72b7b2", "#54a24b",
             "#eeca3b", "#b279a2", "#ff9da6", "#9d755d", "#bab0ac")
# 2-stop ramp for linear color scales, low to high
RAMP2 = ("#2166ac", "#b2182b")

_AXIS_UNIT = {"x": np.array([1.0, 0.0, 0.0]),
              "y": np.array([0.0, 1.0, 0.0]),
              "z": np.array([0.0, 0.0, 1.0])}

# the scalar field name geometry payloads expose (mesh vertex scalars,
# point-cloud weights)
GEOMETRY_SCALAR_FIELD = "scalar"


def default_transfer_function() -> str:
    """256 RGBA entries as hex text; grayscale ramp with linear alpha."""
    raw = bytearray()
    for i in range(256):
        raw += bytes((i, i, i, i))
    return raw.hex()


@dataclass(frozen=True)
class Scale:
    type: str                      # linear | ordinal
    domain: tuple
    range: tuple = ()

    def __post_init__(self):
        if self.type not in ("linear", "ordinal"):
            raise MalformedSpec(f"unknown scale type {self.type!r}")
        object.__setattr__(self, "domain", tuple(self.domain))
        object.__setattr__(self, "range", tuple(self.range or ()))
        if self.type == "linear":
            if len(self.domain) != 2:
                raise MalformedSpec("linear scale domain needs [min, max]")
            if not self.domain[0] < self.domain[1]:
                raise MalformedSpec("linear scale domain must have min < max")

    def to_wire(self) -> dict:
        return {"type": self.type, "domain": list(self.domain),
                "range": list(self.range)}

    @staticmethod
    def from_wire(d: dict) -> "Scale":
        try:
            return Scale(type=d["type"], domain=d["domain"], range=d.get("range", ()))
        except (KeyError, TypeError) as e:
            raise MalformedSpec(f"bad scale: {d!r}") from e


@dataclass(frozen=True)
class ChannelEncoding:
    field: str
    scale: Scale
    legend: bool = False

    def to_wire(self) -> dict:
        return {"field": self.field, "scale": self.scale.to_wire(),
                "legend": self.legend}

    @staticmethod
    def from_wire(d: dict) -> "ChannelEncoding":
        try:
            return ChannelEncoding(field=d["field"], scale=Scale.from_wire(d["scale"]),
                                   legend=bool(d.get("legend", False)))
        except (KeyError, TypeError) as e:
            raise MalformedSpec(f"bad channel encoding: {d!r}") from e


@dataclass(frozen=True)
class Link:
    kind: str                      # TargetLink | AxisLink | ObjectLink
    position: tuple = ()           # TargetLink
    rotation: tuple = ()           # TargetLink, optional 9 numbers
    spec_id: str = ""              # AxisLink / ObjectLink
    shared_field: str = ""         # AxisLink

    def __post_init__(self):
        if self.kind not in ("TargetLink", "AxisLink", "ObjectLink"):
            raise MalformedSpec(f"unknown link kind {self.kind!r}")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "rotation", tuple(float(v) for v in self.rotation))
        if self.kind == "TargetLink" and len(self.position) != 3:
            raise MalformedSpec("TargetLink needs a 3-vector position")
        if self.kind in ("AxisLink", "ObjectLink") and not self.spec_id:
            raise MalformedSpec(f"{self.kind} needs a target spec_id")
        if self.kind == "AxisLink" and not self.shared_field:
            raise MalformedSpec("AxisLink needs a shared_field")

    def to_wire(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "TargetLink":
            out["position"] = list(self.position)
            if self.rotation:
                out["rotation"] = list(self.rotation)
        elif self.kind == "AxisLink":
            out["spec_id"] = self.spec_id
            out["shared_field"] = self.shared_field
        else:
            out["spec_id"] = self.spec_id
        return out

    @staticmethod
    def from_wire(d: dict) -> "Link":
        try:
            return Link(kind=d["kind"], position=d.get("position", ()),
                        rotation=d.get("rotation", ()),
                        spec_id=d.get("spec_id", ""),
                        shared_field=d.get("shared_field", ""))
        except (KeyError, TypeError) as e:
            raise MalformedSpec(f"bad link: {d!r}") from e


@dataclass(frozen=True)
class VisSpec:
    spec_id: str
    mark: str
    data_ref: str
    channels: dict
    coordinate_type: str = "view"
    transform: Similarity = field(default_factory=Similarity.identity)
    link: Optional[Link] = None
    filters: tuple = ()
    transfer_function: Optional[str] = None

    def __post_init__(self):
        if self.mark not in MARKS:
            raise MalformedSpec(f"unknown mark {self.mark!r}")
        if self.coordinate_type not in ("view", "world"):
            raise MalformedSpec(f"coordinate_type must be view or world")
        object.__setattr__(self, "channels", dict(self.channels))
        object.__setattr__(self, "filters", tuple(self.filters))
        for name in self.channels:
            if name not in CHANNELS:
                raise MalformedSpec(f"unknown channel {name!r}")

    def encoded_fields(self) -> set:
        return {enc.field for enc in self.channels.values()}

    def positional_channel_of(self, field_name: str) -> Optional[str]:
        for ch in POSITIONAL:
            enc = self.channels.get(ch)
            if enc is not None and enc.field == field_name:
                return ch
        return None

    def to_wire(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "spec_id": self.spec_id,
            "mark": self.mark,
            "data_ref": self.data_ref,
            "channels": {name: enc.to_wire() for name, enc in self.channels.items()},
            "coordinate_type": self.coordinate_type,
            "transform": self.transform.to_wire(),
            "link": self.link.to_wire() if self.link else None,
            "filters": [dict(f) for f in self.filters],
        }
        if self.transfer_function is not None:
            out["transfer_function"] = self.transfer_function
        return out

    @staticmethod
    def from_wire(d: dict) -> "VisSpec":
        if not isinstance(d, dict):
            raise MalformedSpec("spec must be a JSON object")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise UnknownSchemaVersion(f"unsupported spec schema_version {version!r}")
        for key in ("spec_id", "mark", "data_ref", "channels", "coordinate_type",
                    "transform"):
            if key not in d:
                raise MalformedSpec(f"spec is missing {key!r}")
        try:
            transform = Similarity.from_wire(d["transform"])
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedSpec(f"bad transform: {e}") from e
        channels = {name: ChannelEncoding.from_wire(enc)
                    for name, enc in dict(d["channels"]).items()}
        link = Link.from_wire(d["link"]) if d.get("link") else None
        return VisSpec(
            spec_id=d["spec_id"], mark=d["mark"], data_ref=d["data_ref"],
            channels=channels, coordinate_type=d["coordinate_type"],
            transform=transform, link=link,
            filters=tuple(dict(f) for f in d.get("filters", [])),
            transfer_function=d.get("transfer_function"),
        )


# --------------------------------------------------------------- building

def _default_scale(channel: str, col_type: str, values: list) -> Scale:
    if col_type == NUMBER:
        lo = float(min(values))
        hi = float(max(values))
        if lo == hi:  # widen degenerate domains symmetrically
            lo, hi = lo - 0.5, hi + 0.5
        if channel == "color":
            rng = RAMP2
        elif channel == "size":
            rng = (0.01, 0.05)
        elif channel == "opacity":
            rng = (0.2, 1.0)
        else:
            rng = (0.0, 1.0)
        return Scale(type="linear", domain=(lo, hi), range=rng)
    distinct = sorted({v for v in values}, key=lambda v: (str(type(v)), str(v)))
    if col_type == BOOLEAN:
        distinct = sorted({bool(v) for v in values})
    if channel == "color":
        reps = (len(distinct) + len(PALETTE10) - 1) // len(PALETTE10)
        rng = (PALETTE10 * reps)[:len(distinct)]
    else:
        rng = tuple(float(i) / max(len(distinct) - 1, 1) for i in range(len(distinct)))
    return Scale(type="ordinal", domain=tuple(distinct), range=rng)


def _normalize_channels(channels: dict) -> dict:
    """Accept {"x": "field"} shorthand and fill in explicit dict form."""
    out = {}
    for name, raw in (channels or {}).items():
        if name not in CHANNELS:
            raise MalformedSpec(f"unknown channel {name!r}")
        if isinstance(raw, str):
            out[name] = {"field": raw}
        elif isinstance(raw, dict) and "field" in raw:
            out[name] = dict(raw)
        else:
            raise MalformedSpec(f"channel {name!r} needs a field")
    return out


def build_spec(data: DataValue, mark: str, channels: dict, coordinate_type: str,
               transform: Similarity, store, spec_id: str,
               link: Optional[Link] = None) -> VisSpec:
    """Validate and assemble a spec; the data payload lands in the store."""
    if mark not in MARKS:
        raise MalformedSpec(f"unknown mark {mark!r}")
    chans = _normalize_channels(channels)

    if data.kind == DataKind.TABLE:
        if mark not in ("point", "bar", "line", "text"):
            raise MarkDataMismatch(f"mark {mark!r} cannot encode a table")
        table: Table = data.payload
        if len(table) == 0:
            raise EmptyData("table has no rows")
        encodings = {}
        for name, raw in chans.items():
            fname = raw["field"]
            if fname not in table.types:
                raise UnknownField(f"no column {fname!r} in the table")
            scale = (Scale.from_wire(raw["scale"]) if raw.get("scale")
                     else _default_scale(name, table.types[fname], table.column(fname)))
            encodings[name] = ChannelEncoding(field=fname, scale=scale,
                                              legend=bool(raw.get("legend", False)))
        if mark == "text":
            if "text" not in encodings:
                raise MarkDataMismatch("text marks need a text channel")
        elif "x" not in encodings:
            raise MarkDataMismatch(f"{mark} marks need at least an x channel")
    else:
        expected = {DataKind.MESH: "mesh", DataKind.VOLUME3D: "volume",
                    DataKind.IMAGE2D: "image", DataKind.POINTCLOUD: "point"}
        if data.kind not in expected:
            raise MarkDataMismatch(f"no mark can encode {data.kind.value}")
        if expected[data.kind] != mark:
            raise MarkDataMismatch(
                f"{data.kind.value} data needs mark {expected[data.kind]!r}")
        encodings = {}
        for name, raw in chans.items():
            if name in POSITIONAL:
                raise MarkDataMismatch("geometry marks take no positional channels")
            fname = raw["field"]
            if fname != GEOMETRY_SCALAR_FIELD:
                raise UnknownField(
                    f"geometry payloads expose only the {GEOMETRY_SCALAR_FIELD!r} field")
            scalars = _geometry_scalars(data)
            if scalars is None:
                raise UnknownField("this geometry payload carries no scalar field")
            scale = (Scale.from_wire(raw["scale"]) if raw.get("scale")
                     else _default_scale(name, NUMBER, [float(scalars.min()),
                                                        float(scalars.max())]))
            encodings[name] = ChannelEncoding(field=fname, scale=scale,
                                              legend=bool(raw.get("legend", False)))

    ref = store.put_value(data)
    tf = default_transfer_function() if mark == "volume" else None
    return VisSpec(spec_id=spec_id, mark=mark, data_ref=ref, channels=encodings,
                   coordinate_type=coordinate_type, transform=transform,
                   link=link, transfer_function=tf)


def _geometry_scalars(data: DataValue):
    if data.kind == DataKind.MESH:
        return data.payload.vertex_scalars
    if data.kind == DataKind.POINTCLOUD:
        return data.payload.weights
    return None


# ------------------------------------------------------------ serialization

def serialize_spec(spec: VisSpec) -> str:
    return json.dumps(spec.to_wire(), sort_keys=True, separators=(",", ":"))


def parse_spec(text: str) -> VisSpec:
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, TypeError) as e:
        raise MalformedSpec(f"spec is not valid JSON: {e}") from e
    return VisSpec.from_wire(obj)


# --------------------------------------------------------------- resolution

def resolve_link(spec: VisSpec, registry: dict, _seen: tuple = ()) -> Similarity:
    """Final world transform of a spec against a registry of placed specs.

    ``registry`` maps spec_id to VisSpec for every spec already in the scene.
    Link chains are followed recursively; cycles surface as DanglingLink
    (a cyclic link can never resolve to a placement).
    """
    if spec.spec_id in _seen:
        raise DanglingLink(f"link cycle through {spec.spec_id!r}")
    link = spec.link
    if link is None:
        return spec.transform
    seen = _seen + (spec.spec_id,)

    if link.kind == "TargetLink":
        rotation = (np.array(link.rotation, dtype=np.float64).reshape(3, 3)
                    if link.rotation else np.eye(3))
        return Similarity(rotation=rotation,
                          translation=np.array(link.position),
                          scale=spec.transform.scale)

    target = registry.get(link.spec_id)
    if target is None:
        raise DanglingLink(f"no spec {link.spec_id!r} in the scene")

    if link.kind == "ObjectLink":
        parent = resolve_link(target, registry, seen)
        return parent.compose(spec.transform)

    # AxisLink
    field_name = link.shared_field
    src_ch = spec.positional_channel_of(field_name)
    dst_ch = target.positional_channel_of(field_name)
    if src_ch is None or dst_ch is None:
        raise SharedFieldMissing(
            f"field {field_name!r} is not positionally encoded by both specs")
    src_scale = spec.channels[src_ch].scale
    dst_scale = target.channels[dst_ch].scale
    if src_scale.type != "linear" or dst_scale.type != "linear":
        raise MalformedSpec("AxisLink needs linear scales on the shared field")
    a0, a1 = (float(v) for v in dst_scale.domain)
    b0, b1 = (float(v) for v in src_scale.domain)
    if (a0, a1) != (b0, b1):
        log.warning("AxisLink on %r: domains differ (%s vs %s); aligning by value",
                    field_name, (b0, b1), (a0, a1))
    T = resolve_link(target, registry, seen)
    e_dst = _AXIS_UNIT[dst_ch]
    e_src = _AXIS_UNIT[src_ch]

    def world_of(v: float) -> np.ndarray:
        return T.apply(e_dst * ((v - a0) / (a1 - a0)))

    p0 = world_of(b0)
    p1 = world_of(b1)
    d = p1 - p0
    length = float(np.linalg.norm(d))
    if length < 1e-12:
        raise MalformedSpec("AxisLink target axis collapses to a point")
    return Similarity(rotation=shortest_arc(e_src, d / length),
                      translation=p0, scale=length)


def axis_world_point(spec: VisSpec, resolved: Similarity, field_name: str,
                     value: float) -> np.ndarray:
    """World position of a domain value on a spec's positional axis."""
    ch = spec.positional_channel_of(field_name)
    if ch is None:
        raise SharedFieldMissing(f"{field_name!r} is not positionally encoded")
    scale = spec.channels[ch].scale
    d0, d1 = (float(v) for v in scale.domain)
    return resolved.apply(_AXIS_UNIT[ch] * ((value - d0) / (d1 - d0)))


# -------------------------------------------------------------- interaction

def apply_interaction(spec: VisSpec, action: str, **kwargs) -> VisSpec:
    """Pure spec update for device-side interactions."""
    if action == "rotate":
        R = np.array(kwargs["rotation"], dtype=np.float64).reshape(3, 3)
        t = spec.transform
        return replace(spec, transform=Similarity(rotation=R @ t.rotation,
                                                  translation=t.translation,
                                                  scale=t.scale))
    if action == "scale":
        factor = float(kwargs["factor"])
        t = spec.transform
        return replace(spec, transform=Similarity(rotation=t.rotation,
                                                  translation=t.translation,
                                                  scale=t.scale * factor))
    if action == "translate":
        off = np.asarray(kwargs["offset"], dtype=np.float64).reshape(3)
        t = spec.transform
        return replace(spec, transform=Similarity(rotation=t.rotation,
                                                  translation=t.translation + off,
                                                  scale=t.scale))
    if action == "toggle_filter":
        fname, value = kwargs["field"], kwargs["value"]
        _require_encoded(spec, fname)
        entry = {"type": "toggle", "field": fname, "value": value}
        filters = list(spec.filters)
        if entry in filters:
            filters.remove(entry)
        else:
            filters.append(entry)
        return replace(spec, filters=tuple(filters))
    if action == "threshold_filter":
        fname = kwargs["field"]
        _require_encoded(spec, fname)
        entry = {"type": "threshold", "field": fname,
                 "lo": float(kwargs["lo"]), "hi": float(kwargs["hi"])}
        filters = [f for f in spec.filters
                   if not (f["type"] == "threshold" and f["field"] == fname)]
        filters.append(entry)
        return replace(spec, filters=tuple(filters))
    if action == "detail_on_demand":
        fname = kwargs["field"]
        _require_encoded(spec, fname)
        entry = {"type": "detail", "field": fname}
        filters = list(spec.filters)
        if entry not in filters:
            filters.append(entry)
        return replace(spec, filters=tuple(filters))
    raise MalformedSpec(f"unknown interaction {action!r}")


def _require_encoded(spec: VisSpec, field_name: str) -> None:
    if field_name not in spec.encoded_fields():
        raise UnknownField(f"field {field_name!r} is not encoded by this spec")


def visible_rows(table: Table, filters) -> list:
    """Rows that survive the spec's filter list, original order preserved."""
    excluded = {}
    thresholds = []
    for f in filters:
        if f["type"] == "toggle":
            excluded.setdefault(f["field"], set()).add(f["value"])
        elif f["type"] == "threshold":
            thresholds.append((f["field"], float(f["lo"]), float(f["hi"])))
    out = []
    for row in table.rows:
        hidden = any(row.get(fname) in values for fname, values in excluded.items())
        if hidden:
            continue
        if all(lo <= float(row[fname]) <= hi for fname, lo, hi in thresholds
               if fname in row):
            out.append(row)
    return out
