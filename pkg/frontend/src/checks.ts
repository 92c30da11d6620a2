/**
 * Client-side connection legality, mirroring the engine's rules so bad
 * drags get rejected before any request leaves the browser. The server
 * stays authoritative; these checks must only ever be at least as strict
 * as its own, never looser.
 */
import type { NodeKindInfo, WorkflowDocument } from "./types";

export const ANY_KIND = "any";

export type ConnectVerdict =
  | { ok: true }
  | { ok: false; reason: string };

function reject(reason: string): ConnectVerdict {
  return { ok: false, reason };
}

export function checkConnect(
  doc: WorkflowDocument,
  specs: Map<string, NodeKindInfo>,
  src: string,
  srcPort: string,
  dst: string,
  dstPort: string,
): ConnectVerdict {
  const srcNode = doc.nodes.find((n) => n.id === src);
  const dstNode = doc.nodes.find((n) => n.id === dst);
  if (!srcNode) return reject(`no node ${src}`);
  if (!dstNode) return reject(`no node ${dst}`);
  const srcSpec = specs.get(srcNode.kind);
  const dstSpec = specs.get(dstNode.kind);
  if (!srcSpec || !dstSpec) return reject("unknown node kind");

  const out = srcSpec.outputs.find((p) => p.name === srcPort);
  if (!out) return reject(`${srcNode.kind} has no output ${srcPort}`);
  const inp = dstSpec.inputs.find((p) => p.name === dstPort);
  if (!inp) return reject(`${dstNode.kind} has no input ${dstPort}`);

  const accepts = (kind: string) =>
    inp.kinds.includes(ANY_KIND) || inp.kinds.includes(kind);
  if (!out.kinds.includes(ANY_KIND) && !out.kinds.some(accepts)) {
    return reject(
      `${out.kinds.join("/")} does not match ${inp.kinds.join("/")}`,
    );
  }

  if (doc.edges.some((e) => e.dst === dst && e.dst_port === dstPort)) {
    return reject(`${dst}.${dstPort} already has an incoming edge`);
  }

  if (src === dst || reachableFrom(doc, dst).has(src)) {
    return reject("edge would close a cycle");
  }
  return { ok: true };
}

/** All node ids downstream of start, start excluded. */
export function reachableFrom(
  doc: WorkflowDocument,
  start: string,
): Set<string> {
  const out = new Map<string, string[]>();
  for (const e of doc.edges) {
    const lst = out.get(e.src);
    if (lst) lst.push(e.dst);
    else out.set(e.src, [e.dst]);
  }
  const seen = new Set<string>();
  const queue = [...(out.get(start) ?? [])];
  while (queue.length) {
    const next = queue.shift()!;
    if (seen.has(next)) continue;
    seen.add(next);
    queue.push(...(out.get(next) ?? []));
  }
  return seen;
}
