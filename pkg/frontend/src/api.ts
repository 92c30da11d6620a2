/**
 * REST client for the gateway, with a call recorder.
 *
 * Every mutating request the UI makes is appended to a CallRecord. The
 * record alone must be able to reproduce the saved workspace: replaying
 * it against a fresh server yields the same stored document. Tests hold
 * us to that, so nothing may mutate server state except through here.
 */
import type {
  ExecuteResponse,
  FileEntry,
  RegistryListing,
  SaveResponse,
  WorkflowDocument,
  WorkspaceRecord,
  Layout,
} from "./types";

export interface RecordedCall {
  method: "POST";
  path: string;
  body: unknown;
}

export type CallRecord = RecordedCall[];

export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    detail: string,
  ) {
    super(detail);
    this.name = "GatewayError";
  }
}

async function asError(res: Response): Promise<GatewayError> {
  let kind = "HttpError";
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && typeof body.error === "string") kind = body.error;
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new GatewayError(res.status, kind, detail);
}

export class GatewayClient {
  readonly record: CallRecord = [];

  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.baseUrl + path);
    if (!res.ok) throw await asError(res);
    return (await res.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await asError(res);
    this.record.push({ method: "POST", path, body });
    return (await res.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.get("/api/health");
  }

  registry(): Promise<RegistryListing> {
    return this.get("/api/registry");
  }

  listFiles(): Promise<{ files: FileEntry[] }> {
    return this.get("/api/files");
  }

  loadWorkspace(code: string): Promise<WorkspaceRecord> {
    return this.get(`/api/workspace/${encodeURIComponent(code)}`);
  }

  saveWorkspace(
    code: string,
    document: WorkflowDocument,
    version?: number,
    layout?: Layout,
  ): Promise<SaveResponse> {
    const body: Record<string, unknown> = { document };
    if (version !== undefined) body.version = version;
    if (layout !== undefined) body.layout = layout;
    return this.post(`/api/workspace/${encodeURIComponent(code)}/save`, body);
  }

  executeNode(
    code: string,
    nodeId: string,
    params?: Record<string, unknown>,
  ): Promise<ExecuteResponse> {
    return this.post(
      `/api/workspace/${encodeURIComponent(code)}/node/${nodeId}/execute`,
      { params: params ?? {} },
    );
  }

  /** Raw value bytes by content hash; kind arrives in X-Data-Kind. */
  async fetchData(ref: string): Promise<{ kind: string; bytes: Uint8Array }> {
    const res = await fetch(`${this.baseUrl}/api/data/${ref}`);
    if (!res.ok) throw await asError(res);
    const kind = res.headers.get("X-Data-Kind") ?? "";
    return { kind, bytes: new Uint8Array(await res.arrayBuffer()) };
  }
}

/**
 * Replay a recorded session verbatim against baseUrl, optionally moving
 * it onto another workspace code. Bodies are sent exactly as recorded.
 */
export async function replayRecord(
  baseUrl: string,
  record: CallRecord,
  rewriteCode?: { from: string; to: string },
): Promise<void> {
  for (const call of record) {
    let path = call.path;
    if (rewriteCode) {
      path = path.replace(
        `/api/workspace/${encodeURIComponent(rewriteCode.from)}/`,
        `/api/workspace/${encodeURIComponent(rewriteCode.to)}/`,
      );
    }
    const res = await fetch(baseUrl + path, {
      method: call.method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(call.body),
    });
    if (!res.ok) throw await asError(res);
  }
}
