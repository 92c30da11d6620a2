"""The reactive workflow DAG and its execution engine.

A workflow is a typed node graph. Edits (add, connect, param changes) mark
the affected nodes and their descendants dirty; ``execute`` then re-evaluates
exactly the dirty closure in topological order, reusing cached outputs for
clean nodes. A failed node blocks only its own descendants.
"""
from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Optional

from .errors import (
    CycleDetected,
    FlowError,
    MalformedDocument,
    PortOccupied,
    SchemaVersionMismatch,
    TypeMismatch,
    UnknownNode,
    UnknownPort,
)
from .registry import ANY_KIND, Registry, validate_params

SCHEMA_VERSION = 1


@dataclass
class NodeInstance:
    id: str
    kind: str
    params: dict = field(default_factory=dict)
    dirty: bool = True
    output_cache: dict = field(default_factory=dict)
    error: Optional[str] = None


@dataclass(frozen=True)
class Edge:
    id: str
    src: str
    src_port: str
    dst: str
    dst_port: str


@dataclass
class ExecutionReport:
    executed: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    errors: list = field(default_factory=list)    # (node-id, description)
    wall_time: dict = field(default_factory=dict)  # node-id -> seconds
    pending: list = field(default_factory=list)   # dirty but blocked/unsatisfiable

    def ok(self) -> bool:
        return not self.errors

    def to_jsonable(self) -> dict:
        return {
            "executed": list(self.executed),
            "skipped": list(self.skipped),
            "errors": [[n, e] for n, e in self.errors],
            "wall_time": {k: float(v) for k, v in self.wall_time.items()},
            "pending": list(self.pending),
        }


@dataclass
class ExecutionContext:
    """Everything evaluators may touch besides their inputs and params.

    ``gateway`` is the live gateway state (sessions, stream hub) or None in
    library-only use; ``workspace`` is the owning live workspace, used by
    nodes with persistent side effects (spatial anchors).
    """

    registry: Registry
    store: object = None
    gateway: object = None
    workspace: object = None


class Workflow:
    def __init__(self, registry: Registry):
        self.registry = registry
        self.nodes: dict = {}
        self.edges: dict = {}
        self.version = 0
        self._node_seq = 0
        self._edge_seq = 0

    # ------------------------------------------------------------- lookups
    def node(self, node_id: str) -> NodeInstance:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None

    def edges_into(self, node_id: str) -> dict:
        """Map of dst_port -> Edge for one node."""
        return {e.dst_port: e for e in self.edges.values() if e.dst == node_id}

    def edges_out_of(self, node_id: str) -> list:
        return [e for e in self.edges.values() if e.src == node_id]

    def successors(self, node_id: str) -> set:
        return {e.dst for e in self.edges.values() if e.src == node_id}

    def _reachable_from(self, node_id: str) -> set:
        """All strict descendants of a node (BFS over out-edges)."""
        seen: set = set()
        frontier = [node_id]
        while frontier:
            nxt = []
            for nid in frontier:
                for succ in self.successors(nid):
                    if succ not in seen:
                        seen.add(succ)
                        nxt.append(succ)
            frontier = nxt
        return seen

    # --------------------------------------------------------------- edits
    def add_node(self, kind: str, params: Optional[dict] = None) -> str:
        spec = self.registry.get(kind)
        validate_params(spec, params or {})
        self._node_seq += 1
        node_id = f"n{self._node_seq:04d}"
        self.nodes[node_id] = NodeInstance(id=node_id, kind=kind,
                                           params=dict(params or {}))
        self.version += 1
        return node_id

    def set_params(self, node_id: str, patch: dict) -> None:
        node = self.node(node_id)
        spec = self.registry.get(node.kind)
        merged = dict(node.params)
        merged.update(patch or {})
        validate_params(spec, merged)
        node.params = merged
        self.invalidate(node_id)
        self.version += 1

    def connect(self, src: str, src_port: str, dst: str, dst_port: str) -> str:
        src_node, dst_node = self.node(src), self.node(dst)
        src_spec = self.registry.get(src_node.kind)
        dst_spec = self.registry.get(dst_node.kind)
        out_port = src_spec.output(src_port)
        if out_port is None:
            raise UnknownPort(f"{src_node.kind} has no output port {src_port!r}")
        in_port = dst_spec.input(dst_port)
        if in_port is None:
            raise UnknownPort(f"{dst_node.kind} has no input port {dst_port!r}")
        src_kinds = out_port.kinds
        if ANY_KIND not in src_kinds and not any(in_port.accepts(k) for k in src_kinds):
            raise TypeMismatch(
                f"cannot connect {src_node.kind}.{src_port} ({'/'.join(src_kinds)}) "
                f"to {dst_node.kind}.{dst_port} ({'/'.join(in_port.kinds)})")
        if dst_port in self.edges_into(dst):
            raise PortOccupied(f"{dst}.{dst_port} already has an incoming edge")
        if src == dst or src in self._reachable_from(dst):
            raise CycleDetected(f"edge {src}->{dst} would close a cycle")
        self._edge_seq += 1
        edge_id = f"e{self._edge_seq:04d}"
        self.edges[edge_id] = Edge(id=edge_id, src=src, src_port=src_port,
                                   dst=dst, dst_port=dst_port)
        self.invalidate(dst)
        self.version += 1
        return edge_id

    def disconnect(self, edge_id: str) -> None:
        edge = self.edges.pop(edge_id, None)
        if edge is None:
            raise UnknownNode(f"no edge {edge_id!r}")
        self.invalidate(edge.dst)
        self.version += 1

    def remove_node(self, node_id: str) -> None:
        self.node(node_id)
        downstream = self._reachable_from(node_id)
        self.edges = {eid: e for eid, e in self.edges.items()
                      if e.src != node_id and e.dst != node_id}
        del self.nodes[node_id]
        for nid in downstream:
            if nid in self.nodes:
                self.invalidate(nid)
        self.version += 1

    def invalidate(self, node_id: str) -> set:
        """Mark a node and all descendants dirty; caches stay until overwritten."""
        node = self.node(node_id)
        affected = {node_id} | self._reachable_from(node_id)
        for nid in affected:
            self.nodes[nid].dirty = True
        return affected

    # ----------------------------------------------------------- execution
    def _topo_order(self, subset: set) -> list:
        """Topological order of ``subset``, ties broken by ascending node id."""
        indeg = {nid: 0 for nid in subset}
        out: dict = {nid: [] for nid in subset}
        for e in self.edges.values():
            if e.src in subset and e.dst in subset:
                indeg[e.dst] += 1
                out[e.src].append(e.dst)
        heap = sorted(nid for nid, d in indeg.items() if d == 0)
        order = []
        while heap:
            nid = heapq.heappop(heap)
            order.append(nid)
            for succ in out[nid]:
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    heapq.heappush(heap, succ)
        if len(order) != len(subset):
            raise CycleDetected("workflow contains a cycle")  # invariant breach
        return order

    def execute(self, ctx: ExecutionContext) -> ExecutionReport:
        report = ExecutionReport()
        dirty0 = {nid for nid, n in self.nodes.items() if n.dirty}
        report.skipped = sorted(nid for nid in self.nodes if nid not in dirty0)
        held = set()  # dirty nodes not evaluated: failed upstream or unsatisfiable
        for nid in self._topo_order(dirty0):
            node = self.nodes[nid]
            spec = self.registry.get(node.kind)
            incoming = self.edges_into(nid)
            inputs: dict = {}
            unsatisfied = None
            for p in spec.inputs:
                edge = incoming.get(p.name)
                if edge is None:
                    if p.required:
                        unsatisfied = f"input {p.name!r} is not connected"
                    continue
                src = self.nodes[edge.src]
                if src.dirty or edge.src_port not in src.output_cache:
                    # producer failed, was held, or never ran
                    unsatisfied = f"input {p.name!r} has no value (upstream {edge.src})"
                    break
                inputs[p.name] = src.output_cache[edge.src_port]
            if unsatisfied is not None:
                held.add(nid)
                continue
            t0 = time.perf_counter()
            try:
                outputs = spec.evaluator(ctx, node, inputs)
            except FlowError as e:
                node.error = f"{type(e).__name__}: {e}"
                report.errors.append((nid, node.error))
                continue
            except Exception as e:  # evaluator bug: contained, never fatal
                node.error = f"{type(e).__name__}: {e}"
                report.errors.append((nid, node.error))
                continue
            report.wall_time[nid] = time.perf_counter() - t0
            node.output_cache = dict(outputs or {})
            node.dirty = False
            node.error = None
            report.executed.append(nid)
        report.pending = sorted(held)
        return report

    # ------------------------------------------------------- serialization
    def serialize(self, access_code: str = "") -> dict:
        nodes = [{"id": n.id, "kind": n.kind, "params": dict(n.params)}
                 for n in sorted(self.nodes.values(), key=lambda n: n.id)]
        edges = [{"src": e.src, "src_port": e.src_port,
                  "dst": e.dst, "dst_port": e.dst_port}
                 for e in sorted(self.edges.values(), key=lambda e: e.id)]
        return {"schema_version": SCHEMA_VERSION, "access_code": access_code,
                "nodes": nodes, "edges": edges}

    @classmethod
    def deserialize(cls, document: dict, registry: Registry) -> "Workflow":
        if not isinstance(document, dict):
            raise MalformedDocument("workspace document must be a JSON object")
        version = document.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"unsupported schema_version {version!r}")
        for key in ("nodes", "edges"):
            if key not in document or not isinstance(document[key], list):
                raise MalformedDocument(f"document is missing {key!r}")
        wf = cls(registry)
        seen = set()
        for entry in document["nodes"]:
            try:
                nid, kind = entry["id"], entry["kind"]
                params = entry.get("params", {})
            except (TypeError, KeyError) as e:
                raise MalformedDocument(f"bad node entry: {entry!r}") from e
            if nid in seen:
                raise MalformedDocument(f"duplicate node id {nid!r}")
            seen.add(nid)
            spec = registry.get(kind)
            validate_params(spec, params)
            wf.nodes[nid] = NodeInstance(id=nid, kind=kind, params=dict(params))
            # keep server-assigned ids monotone past loaded ones
            if nid.startswith("n") and nid[1:].isdigit():
                wf._node_seq = max(wf._node_seq, int(nid[1:]))
        for entry in document["edges"]:
            try:
                src, sp = entry["src"], entry["src_port"]
                dst, dp = entry["dst"], entry["dst_port"]
            except (TypeError, KeyError) as e:
                raise MalformedDocument(f"bad edge entry: {entry!r}") from e
            try:
                wf.connect(src, sp, dst, dp)
            except FlowError as e:
                raise MalformedDocument(f"bad edge {entry!r}: {e}") from e
        wf.version = 0
        for node in wf.nodes.values():
            node.dirty = True
        return wf
