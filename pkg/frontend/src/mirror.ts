/**
 * CanvasGraph: the client-side mirror of one workspace.
 *
 * The mirror owns a workflow document plus the layout sidecar and keeps
 * them derivable from (last loaded record + local edits). Semantic edits
 * go through saves; layout never touches the document. Node ids continue
 * the server's sequence (n0001, n0002, ...) so a loaded graph can be
 * extended without collisions.
 */
import type { GatewayClient } from "./api";
import type {
  ExecuteResponse,
  ExecutionReport,
  Layout,
  NodeEntry,
  NodeKindInfo,
  NodePosition,
  WorkflowDocument,
  WorkspaceRecord,
} from "./types";
import { checkConnect, type ConnectVerdict } from "./checks";

const DOC_SCHEMA_VERSION = 1;

export type Badge = "clean" | "dirty" | "error";

export interface NodeStatus {
  badge: Badge;
  error?: string;
}

export class MirrorError extends Error {}

function seedValue(type: string): unknown {
  switch (type) {
    case "number":
      return 0;
    case "boolean":
      return false;
    case "json":
      return {};
    default:
      return "";
  }
}

export class CanvasGraph {
  code: string;
  /** Stored version for optimistic saves; a fresh code starts at 0. */
  version = 0;
  nodes: NodeEntry[] = [];
  edges: WorkflowDocument["edges"] = [];
  layout: Layout = {};
  status = new Map<string, NodeStatus>();
  selection: string | null = null;
  /** Output refs from the most recent execute; feeds the preview pane. */
  lastOutputs: ExecuteResponse["outputs"] = {};

  private nodeSeq = 0;
  private readonly specs: Map<string, NodeKindInfo>;

  constructor(specs: Iterable<NodeKindInfo>, code = "untitled") {
    this.specs = new Map([...specs].map((s) => [s.kind, s]));
    this.code = code;
  }

  static fromRecord(
    specs: Iterable<NodeKindInfo>,
    record: WorkspaceRecord,
  ): CanvasGraph {
    const g = new CanvasGraph(specs, record.access_code);
    g.version = record.version;
    g.nodes = record.document.nodes.map((n) => ({ ...n, params: { ...n.params } }));
    g.edges = record.document.edges.map((e) => ({ ...e }));
    g.layout = { ...(record.layout ?? {}) };
    for (const n of g.nodes) {
      g.status.set(n.id, { badge: "dirty" });
      const m = /^n(\d+)$/.exec(n.id);
      if (m) g.nodeSeq = Math.max(g.nodeSeq, Number(m[1]));
    }
    return g;
  }

  spec(kind: string): NodeKindInfo {
    const s = this.specs.get(kind);
    if (!s) throw new MirrorError(`unknown node kind ${kind}`);
    return s;
  }

  node(id: string): NodeEntry {
    const n = this.nodes.find((n) => n.id === id);
    if (!n) throw new MirrorError(`no node ${id}`);
    return n;
  }

  document(): WorkflowDocument {
    return {
      schema_version: DOC_SCHEMA_VERSION,
      access_code: this.code,
      // same ordering the engine serializes: nodes by id, edges as created
      nodes: [...this.nodes]
        .sort((a, b) => a.id.localeCompare(b.id))
        .map((n) => ({ id: n.id, kind: n.kind, params: { ...n.params } })),
      edges: this.edges.map((e) => ({ ...e })),
    };
  }

  // -------------------------------------------------------------- edits

  /**
   * Drop a node from the panel onto the canvas. Params start from the
   * declared defaults; required params without one get a typed zero so
   * the document stays servable (the engine validates presence, not
   * emptiness).
   */
  addNode(
    kind: string,
    pos: NodePosition,
    params?: Record<string, unknown>,
  ): string {
    const spec = this.spec(kind);
    const seeded: Record<string, unknown> = {};
    for (const p of spec.params) {
      if (p.default !== null && p.default !== undefined) {
        seeded[p.name] = p.default;
      } else if (p.required) {
        seeded[p.name] = seedValue(p.type);
      }
    }
    Object.assign(seeded, params ?? {});
    this.validateParams(kind, seeded);
    this.nodeSeq += 1;
    const id = `n${String(this.nodeSeq).padStart(4, "0")}`;
    this.nodes.push({ id, kind, params: seeded });
    this.layout[id] = { ...pos };
    this.status.set(id, { badge: "dirty" });
    return id;
  }

  deleteNode(id: string): void {
    this.node(id);
    this.nodes = this.nodes.filter((n) => n.id !== id);
    this.edges = this.edges.filter((e) => e.src !== id && e.dst !== id);
    delete this.layout[id];
    this.status.delete(id);
    if (this.selection === id) this.selection = null;
  }

  /** Validate only; lets the canvas paint the rejection affordance. */
  canConnect(
    src: string,
    srcPort: string,
    dst: string,
    dstPort: string,
  ): ConnectVerdict {
    return checkConnect(this.document(), this.specs, src, srcPort, dst, dstPort);
  }

  connect(src: string, srcPort: string, dst: string, dstPort: string): void {
    const verdict = this.canConnect(src, srcPort, dst, dstPort);
    if (!verdict.ok) throw new MirrorError(verdict.reason);
    this.edges.push({ src, src_port: srcPort, dst, dst_port: dstPort });
    this.markDirty(dst);
  }

  disconnect(dst: string, dstPort: string): void {
    const i = this.edges.findIndex(
      (e) => e.dst === dst && e.dst_port === dstPort,
    );
    if (i === -1) throw new MirrorError(`no edge into ${dst}.${dstPort}`);
    this.edges.splice(i, 1);
    this.markDirty(dst);
  }

  editParams(id: string, patch: Record<string, unknown>): void {
    const node = this.node(id);
    const merged = { ...node.params, ...patch };
    this.validateParams(node.kind, merged);
    node.params = merged;
    this.markDirty(id);
  }

  /** Layout is cosmetic; the document must be bit-identical afterwards. */
  moveNode(id: string, pos: NodePosition): void {
    this.node(id);
    this.layout[id] = { ...pos };
  }

  private validateParams(kind: string, params: Record<string, unknown>): void {
    const spec = this.spec(kind);
    const byName = new Map(spec.params.map((p) => [p.name, p]));
    for (const [name, value] of Object.entries(params)) {
      const p = byName.get(name);
      if (!p) throw new MirrorError(`${kind} has no param ${name}`);
      if (!typeOk(p.type, value)) {
        throw new MirrorError(`${kind}.${name} must be ${p.type}`);
      }
    }
    for (const p of spec.params) {
      if (p.required && !(p.name in params)) {
        throw new MirrorError(`${kind} requires param ${p.name}`);
      }
    }
  }

  private markDirty(id: string): void {
    this.status.set(id, { badge: "dirty" });
    // downstream nodes recompute too; badge them so the canvas shows it
    for (const e of this.edges) {
      if (e.src === id) {
        const s = this.status.get(e.dst);
        if (s && s.badge !== "dirty") this.markDirty(e.dst);
      }
    }
  }

  // ------------------------------------------------------------- server

  async save(client: GatewayClient): Promise<void> {
    const res = await client.saveWorkspace(
      this.code,
      this.document(),
      this.version,
      this.layout,
    );
    this.version = res.version;
  }

  async load(client: GatewayClient, code: string): Promise<void> {
    const record = await client.loadWorkspace(code);
    const fresh = CanvasGraph.fromRecord(this.specs.values(), record);
    this.code = fresh.code;
    this.version = fresh.version;
    this.nodes = fresh.nodes;
    this.edges = fresh.edges;
    this.layout = fresh.layout;
    this.status = fresh.status;
    this.selection = null;
    this.nodeSeq = fresh.nodeSeq;
  }

  /**
   * Run one node (and whatever upstream it needs) server-side. Params
   * travel through saves, never through execute, so the stored document
   * and its version cannot move under us here.
   */
  async execute(client: GatewayClient, nodeId: string): Promise<ExecutionReport> {
    const res = await client.executeNode(this.code, nodeId, {});
    this.lastOutputs = res.outputs;
    this.applyReport(res.report);
    return res.report;
  }

  applyReport(report: ExecutionReport): void {
    // executed, errors, and pending are disjoint on the wire: a failed
    // node is reported in errors only and stays dirty server-side
    for (const id of report.executed) {
      if (this.status.has(id)) this.status.set(id, { badge: "clean" });
    }
    for (const [id, message] of report.errors) {
      if (this.status.has(id)) this.status.set(id, { badge: "error", error: message });
    }
    for (const id of report.pending) {
      if (this.status.has(id)) this.status.set(id, { badge: "dirty" });
    }
  }
}

function typeOk(type: string, value: unknown): boolean {
  switch (type) {
    case "number":
      return typeof value === "number" && Number.isFinite(value);
    case "text":
      return typeof value === "string";
    case "boolean":
      return typeof value === "boolean";
    case "json":
      return value !== null && typeof value === "object";
    default:
      // the engine rejects param types it does not know; so do we
      return false;
  }
}
