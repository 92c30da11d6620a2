/**
 * Shared test fixtures: a canonical-bytes packer, a registry-shaped spec
 * list for offline graph tests, and a real gateway process for the
 * equivalence suite.
 */
import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import type { NodeKindInfo } from "../src/types";

// ------------------------------------------------------- canonical bytes

/** Pack a value the way the gateway serializes them (XDV1 layout). */
export function packValue(
  kind: string,
  header: unknown,
  blob: Uint8Array = new Uint8Array(0),
): Uint8Array {
  const enc = new TextEncoder();
  const kindBytes = enc.encode(kind);
  const headerBytes = enc.encode(JSON.stringify(header));
  const out = new Uint8Array(4 + 1 + kindBytes.length + 4 + headerBytes.length + blob.length);
  out.set(enc.encode("XDV1"), 0);
  out[4] = kindBytes.length;
  out.set(kindBytes, 5);
  let off = 5 + kindBytes.length;
  new DataView(out.buffer).setUint32(off, headerBytes.length, true);
  off += 4;
  out.set(headerBytes, off);
  out.set(blob, off + headerBytes.length);
  return out;
}

// ------------------------------------------------------- offline fixtures

// Shapes copied from the live registry listing; the equivalence suite
// checks the real thing, these keep the graph tests serverless.
export const SPECS: NodeKindInfo[] = [
  {
    kind: "DataFile",
    category: "Input",
    description: "Read a table from the data store.",
    inputs: [],
    outputs: [{ name: "table", kinds: ["Table"] }],
    params: [{ name: "path", type: "text", required: true, default: null }],
  },
  {
    kind: "Image3DFile",
    category: "Input",
    description: "Read a volume from the data store.",
    inputs: [],
    outputs: [{ name: "volume", kinds: ["Volume3D"] }],
    params: [{ name: "path", type: "text", required: true, default: null }],
  },
  {
    kind: "IsoSurface",
    category: "Processing/Data",
    description: "Extract an isosurface mesh.",
    inputs: [{ name: "volume", kinds: ["Volume3D"], required: true }],
    outputs: [{ name: "mesh", kinds: ["Mesh"] }],
    params: [{ name: "isovalue", type: "number", required: true, default: null }],
  },
  {
    kind: "VisualEncoding",
    category: "Processing/Encoding",
    description: "Build a visualization spec.",
    inputs: [
      { name: "data", kinds: ["Table", "Mesh", "Volume3D", "Image2D", "PointCloud"], required: true },
      { name: "position", kinds: ["Pose"], required: false },
    ],
    outputs: [{ name: "spec", kinds: ["VisSpec"] }],
    params: [
      { name: "mark", type: "text", required: true, default: null },
      { name: "channels", type: "json", required: false, default: null },
      { name: "coordinate_type", type: "text", required: false, default: "view" },
      { name: "scale", type: "number", required: false, default: 1.0 },
    ],
  },
  {
    kind: "Custom",
    category: "Processing/Data",
    description: "Call an external endpoint.",
    inputs: [{ name: "input", kinds: ["any"], required: true }],
    outputs: [{ name: "output", kinds: ["any"] }],
    params: [
      { name: "endpoint", type: "text", required: true, default: null },
      { name: "function", type: "text", required: true, default: null },
      { name: "args", type: "json", required: false, default: null },
    ],
  },
];

// ------------------------------------------------------------ live server

export interface Gateway {
  base: string;
  root: string;
  stop(): void;
}

/** Spawn a real gateway on a free port; resolves once it is accepting. */
export async function startGateway(opts: { seedDemos?: boolean } = {}): Promise<Gateway> {
  const root = mkdtempSync(join(tmpdir(), "xrflow-ui-"));
  if (opts.seedDemos) {
    const seeded = spawnSync("xrflow", ["seed-demos", "--data-root", root], {
      encoding: "utf-8",
    });
    if (seeded.status !== 0) {
      throw new Error(`seed-demos failed: ${seeded.stderr}`);
    }
  }
  const child: ChildProcess = spawn(
    "xrflow",
    ["serve", "--addr", "127.0.0.1:0", "--data-root", root],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let buffered = "";
  let stderr = "";
  child.stderr!.on("data", (c: Buffer) => (stderr += c.toString()));

  const base = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error(`gateway did not come up; stderr:\n${stderr}`)),
      20_000,
    );
    child.stdout!.on("data", (chunk: Buffer) => {
      buffered += chunk.toString();
      const m = /listening on (http:\/\/[^\s]+)/.exec(buffered);
      if (m) {
        clearTimeout(timer);
        resolve(m[1]!);
      }
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`gateway exited early (${code}); stderr:\n${stderr}`));
    });
  });

  return {
    base,
    root,
    stop() {
      child.kill("SIGTERM");
      rmSync(root, { recursive: true, force: true });
    },
  };
}
