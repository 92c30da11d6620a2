"""Workspace persistence and the live, executable view of a workspace.

On disk a workspace is one JSON file per access code:

    {"access_code", "version", "updated_at", "document", "anchors", "layout"}

document is the workflow document; anchors and layout are sidecars (shared
spatial anchors, webui node positions) that survive document rewrites.
Saves are atomic replaces with optimistic version checking.
"""
from __future__ import annotations

import json
import threading
import time
from pathlib import Path
from typing import Optional

from ..datastore import atomic_write
from ..errors import ConflictingVersion, MalformedDocument, ParseError, UnknownWorkspace
from ..graph import ExecutionContext, Workflow


class WorkspaceStore:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, code: str) -> Path:
        if not code or "/" in code or code.startswith("."):
            raise UnknownWorkspace(f"bad access code {code!r}")
        return self.root / f"{code}.json"

    def list_codes(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def exists(self, code: str) -> bool:
        return self._path(code).exists()

    def load(self, code: str) -> dict:
        path = self._path(code)
        if not path.exists():
            raise UnknownWorkspace(f"no workspace {code!r}")
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)

    def save(self, code: str, document: dict,
             version: Optional[int] = None,
             anchors: Optional[list] = None,
             layout: Optional[dict] = None) -> dict:
        """Persist; returns the stored record. version=None skips the check."""
        if not isinstance(document, dict):
            raise MalformedDocument("document must be a JSON object")
        with self._lock:
            path = self._path(code)
            if path.exists():
                with open(path, "r", encoding="utf-8") as fh:
                    stored = json.load(fh)
            else:
                stored = {"version": 0, "anchors": [], "layout": {}}
            if version is not None and version != stored["version"]:
                raise ConflictingVersion(
                    f"workspace {code!r} is at version {stored['version']}, "
                    f"save supplied {version}")
            record = {
                "access_code": code,
                "version": stored["version"] + 1,
                "updated_at": time.time(),
                "document": document,
                "anchors": anchors if anchors is not None else stored["anchors"],
                "layout": layout if layout is not None else stored["layout"],
            }
            atomic_write(path, json.dumps(record, sort_keys=True).encode())
            return record


class LiveWorkspace:
    """One workspace held in memory with its output caches intact.

    All graph edits and executions for a workspace pass through its lock, so
    interleaved requests observe a linear sequence of versions.
    """

    def __init__(self, code: str, store: WorkspaceStore, registry, data_store,
                 gateway):
        self.code = code
        self.store = store
        self.registry = registry
        self.data_store = data_store
        self.gateway = gateway
        self.lock = threading.RLock()
        record = store.load(code)
        self.workflow = Workflow.deserialize(record["document"], registry)
        self.stored_version = record["version"]

    # --------------------------------------------------------- node effects
    def add_anchor(self, position) -> dict:
        with self.lock:
            record = self.store.load(self.code)
            anchors = list(record["anchors"])
            anchor = {"anchor_id": f"a{len(anchors) + 1}",
                      "position": [float(v) for v in position]}
            anchors.append(anchor)
            saved = self.store.save(self.code, record["document"],
                                    anchors=anchors, layout=record["layout"])
            self.stored_version = saved["version"]
            return anchor

    # ------------------------------------------------------------ execution
    def _context(self) -> ExecutionContext:
        return ExecutionContext(registry=self.registry, store=self.data_store,
                                gateway=self.gateway, workspace=self)

    def execute_node(self, node_id: str, params_patch: Optional[dict] = None):
        """Patch params, invalidate, run the dirty closure; persist the doc."""
        with self.lock:
            node = self.workflow.node(node_id)  # UnknownNode before any edit
            if params_patch:
                self.workflow.set_params(node_id, params_patch)
            else:
                self.workflow.invalidate(node_id)
            report = self.workflow.execute(self._context())
            outputs = self._publish_outputs(report.executed)
            if params_patch:
                record = self.store.save(self.code,
                                         self.workflow.serialize(self.code))
                self.stored_version = record["version"]
            return report, outputs

    def execute_all(self):
        with self.lock:
            report = self.workflow.execute(self._context())
            outputs = self._publish_outputs(report.executed)
            return report, outputs

    def _publish_outputs(self, executed) -> dict:
        """Content hashes of fresh outputs, for display and GET /api/data.

        Session-local kinds (device keys, stream handles) have no canonical
        byte form; they are reported by kind only.
        """
        out: dict = {}
        for nid in executed:
            node = self.workflow.nodes[nid]
            ports = {}
            for port_name, value in node.output_cache.items():
                entry = {"kind": value.kind.value}
                try:
                    entry["hash"] = self.data_store.put_value(value)
                except ParseError:
                    pass
                ports[port_name] = entry
            out[nid] = ports
        return out

    def replace_document(self, document: dict,
                         version: Optional[int] = None) -> dict:
        """Swap in a new document (the save endpoint); caches reset."""
        with self.lock:
            workflow = Workflow.deserialize(document, self.registry)
            record = self.store.save(self.code, document, version=version)
            self.workflow = workflow
            self.stored_version = record["version"]
            return record
