// Gateway wire shapes. Field names here are the REST contract, not ours
// to rename.

export interface PortInfo {
  name: string;
  kinds: string[];
  required?: boolean;
}

export interface ParamInfo {
  name: string;
  type: string;
  required: boolean;
  default: unknown;
}

export interface NodeKindInfo {
  kind: string;
  category: string;
  description: string;
  inputs: PortInfo[];
  outputs: PortInfo[];
  params: ParamInfo[];
}

export interface RegistryListing {
  nodes: NodeKindInfo[];
}

export interface NodeEntry {
  id: string;
  kind: string;
  params: Record<string, unknown>;
}

export interface EdgeEntry {
  src: string;
  src_port: string;
  dst: string;
  dst_port: string;
}

export interface WorkflowDocument {
  schema_version: number;
  access_code: string;
  nodes: NodeEntry[];
  edges: EdgeEntry[];
}

/** Canvas position of one node; lives in the layout sidecar only. */
export interface NodePosition {
  x: number;
  y: number;
}

export type Layout = Record<string, NodePosition>;

export interface WorkspaceRecord {
  access_code: string;
  version: number;
  updated_at: number;
  document: WorkflowDocument;
  anchors: unknown[];
  layout: Layout;
}

export interface ExecutionReport {
  executed: string[];
  skipped: string[];
  errors: [string, string][];
  wall_time: Record<string, number>;
  pending: string[];
}

export interface ExecuteResponse {
  report: ExecutionReport;
  outputs: Record<string, Record<string, { kind: string; hash?: string }>>;
  version: number;
}

export interface SaveResponse {
  access_code: string;
  version: number;
  updated_at: number;
}

export interface FileEntry {
  name: string;
  size: number;
  suffix: string;
}

// ----------------------------------------------------------- spec wire

export interface ScaleWire {
  type: string;
  domain: unknown[];
  range: unknown[];
}

export interface ChannelWire {
  field: string;
  scale: ScaleWire;
  legend: boolean;
}

export interface SpecWire {
  schema_version: number;
  spec_id: string;
  mark: string;
  data_ref: string;
  channels: Record<string, ChannelWire>;
  coordinate_type: string;
  transform: { rotation: number[]; translation: number[]; scale: number };
  link: { kind: string; [k: string]: unknown } | null;
  filters: FilterWire[];
  transfer_function?: string;
}

export type FilterWire =
  | { type: "toggle"; field: string; value: unknown }
  | { type: "threshold"; field: string; lo: number; hi: number };

export type TableRow = Record<string, number | string | boolean>;

export interface TablePayload {
  columns: string[];
  types: Record<string, string>;
  rows: TableRow[];
}
