"""Input loaders: tables, images, volumes.

Formats: tables from .json (array of flat objects) or .csv with a header
row; images from .png/.pgm (16-bit grayscale loads as a depth map);
volumes as raw little-endian scalars next to a JSON sidecar
{dims, spacing, origin, dtype in {u8, u16, f32}}, x-fastest.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import KindMismatch, ParseError
from ..values import BOOLEAN, NUMBER, TEXT, Image2D, Table, Volume3D

_VOLUME_DTYPES = {"u8": "<u1", "u16": "<u2", "f32": "<f4"}


def _cell_from_json(value, where: str):
    if value is None:
        raise ParseError(f"null cell at {where}; columns are number, text, or boolean")
    if isinstance(value, (bool, int, float, str)):
        return value
    raise ParseError(f"unsupported cell {value!r} at {where}")


def load_table(path: Path) -> Table:
    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"{path.name}: {e}") from e
        if not isinstance(raw, list) or any(not isinstance(r, dict) for r in raw):
            raise ParseError(f"{path.name}: expected a JSON array of flat objects")
        records = []
        for i, rec in enumerate(raw):
            records.append({k: _cell_from_json(v, f"{path.name} row {i} field {k!r}")
                            for k, v in rec.items()})
        return Table.from_records(records)
    if suffix == ".csv":
        with path.open(newline="") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None:
                raise ParseError(f"{path.name}: missing header row")
            rows = list(reader)
        if not rows:
            return Table(columns=list(reader.fieldnames),
                         types={c: TEXT for c in reader.fieldnames}, rows=[])
        # column is numeric if every cell parses as a number
        types = {}
        for col in reader.fieldnames:
            numeric = True
            for row in rows:
                cell = row.get(col)
                if cell is None:
                    raise ParseError(f"{path.name}: ragged row, missing {col!r}")
                try:
                    float(cell)
                except ValueError:
                    numeric = False
                    break
            types[col] = NUMBER if numeric else TEXT
        records = []
        for row in rows:
            rec = {}
            for col in reader.fieldnames:
                rec[col] = float(row[col]) if types[col] == NUMBER else row[col]
            records.append(rec)
        return Table(columns=list(reader.fieldnames), types=types, rows=records)
    raise KindMismatch(f"cannot load a table from {path.suffix!r}")


def load_image(path: Path) -> Image2D:
    if path.suffix.lower() not in (".png", ".pgm"):
        raise KindMismatch(f"cannot load an image from {path.suffix!r}")
    try:
        img = Image.open(path)
        img.load()
    except Exception as e:
        raise ParseError(f"{path.name}: {e}") from e
    if img.mode in ("I", "I;16", "I;16B"):
        px = np.asarray(img, dtype=np.uint32)
        if px.max(initial=0) > 0xFFFF:
            raise ParseError(f"{path.name}: sample depth exceeds 16 bit")
        return Image2D(pixels=px.astype(np.uint16), format="u16")
    if img.mode == "L":
        return Image2D(pixels=np.asarray(img, dtype=np.uint8), format="u8")
    if img.mode == "RGB":
        return Image2D(pixels=np.asarray(img, dtype=np.uint8), format="rgb8")
    if img.mode == "RGBA":
        return Image2D(pixels=np.asarray(img, dtype=np.uint8), format="rgba8")
    img = img.convert("RGBA")
    return Image2D(pixels=np.asarray(img, dtype=np.uint8), format="rgba8")


def load_volume(path: Path) -> Volume3D:
    """Load a .raw/.json volume pair; either file may be named."""
    if path.suffix.lower() == ".json":
        sidecar = path
        raw_path = path.with_suffix(".raw")
    elif path.suffix.lower() == ".raw":
        sidecar = path.with_suffix(".json")
        raw_path = path
    else:
        raise KindMismatch(f"cannot load a volume from {path.suffix!r}")
    if not sidecar.exists():
        raise ParseError(f"volume sidecar {sidecar.name} is missing")
    if not raw_path.exists():
        raise ParseError(f"volume data {raw_path.name} is missing")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{sidecar.name}: {e}") from e
    try:
        dims = [int(v) for v in header["dims"]]
        spacing = [float(v) for v in header["spacing"]]
        origin = [float(v) for v in header.get("origin", (0.0, 0.0, 0.0))]
        dtype = header["dtype"]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{sidecar.name}: bad volume header: {e}") from e
    if dtype not in _VOLUME_DTYPES:
        raise ParseError(f"{sidecar.name}: dtype must be one of u8, u16, f32")
    data = np.frombuffer(raw_path.read_bytes(), dtype=_VOLUME_DTYPES[dtype])
    expected = dims[0] * dims[1] * dims[2]
    if data.size != expected:
        raise ParseError(
            f"{raw_path.name}: expected {expected} samples, found {data.size}")
    return Volume3D(dims=dims, spacing=spacing, origin=origin, samples=data)


def save_volume(vol: Volume3D, raw_path: Path) -> None:
    """Write the .raw/.json pair used by load_volume."""
    raw_path = Path(raw_path)
    sidecar = raw_path.with_suffix(".json")
    raw_path.write_bytes(vol.samples.tobytes())
    sidecar.write_text(json.dumps({
        "dims": list(vol.dims),
        "spacing": list(vol.spacing),
        "origin": [float(v) for v in vol.origin],
        "dtype": vol.dtype_name,
    }, indent=2, sort_keys=True))
