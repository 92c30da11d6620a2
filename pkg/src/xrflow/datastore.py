"""Content-addressed store for large payloads plus data-root file resolution.

Layout under one root directory:

    objects/     content-hash blobs (canonical DataValue encodings)
    files/       user input files (tables, images, volumes)
    workspaces/  one JSON document per access code
    scenarios/   scripted device scenarios bundled with demo fixtures
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

from .errors import DataRootUnwritable, FileNotFound, NotFound
from .values import DataValue, canonical_bytes, content_hash, parse_bytes


def atomic_write(path: Path, data: bytes) -> None:
    """Write via a temp file + rename so readers never see partial content."""
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class DataStore:
    def __init__(self, root):
        self.root = Path(root)
        try:
            for sub in ("objects", "files", "workspaces", "scenarios"):
                (self.root / sub).mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataRootUnwritable(f"cannot prepare data root {self.root}: {e}") from e

    # -- content-addressed objects ----------------------------------------
    def put_value(self, value: DataValue) -> str:
        data = canonical_bytes(value)
        ref = content_hash(value)
        path = self.root / "objects" / ref
        if not path.exists():
            atomic_write(path, data)
        return ref

    def get_bytes(self, ref: str) -> tuple:
        """Returns (kind name, raw canonical bytes)."""
        path = self.root / "objects" / ref
        if not path.exists():
            raise NotFound(f"no stored object {ref}")
        data = path.read_bytes()
        value = parse_bytes(data)
        return value.kind.value, data

    def get_value(self, ref: str) -> DataValue:
        path = self.root / "objects" / ref
        if not path.exists():
            raise NotFound(f"no stored object {ref}")
        return parse_bytes(path.read_bytes())

    def has(self, ref: str) -> bool:
        return (self.root / "objects" / ref).exists()

    # -- input files -------------------------------------------------------
    def resolve_file(self, path) -> Path:
        """Resolve an input path: absolute paths as given, otherwise under files/."""
        p = Path(path)
        if p.is_absolute():
            if p.exists():
                return p
            raise FileNotFound(f"no such file: {p}")
        candidate = self.root / "files" / p
        if candidate.exists():
            return candidate
        candidate = self.root / p
        if candidate.exists():
            return candidate
        raise FileNotFound(f"no such file under {self.root}: {path}")

    @property
    def files_dir(self) -> Path:
        return self.root / "files"

    @property
    def scenarios_dir(self) -> Path:
        return self.root / "scenarios"

    @property
    def workspaces_dir(self) -> Path:
        return self.root / "workspaces"
