/**
 * Decoder for the gateway's canonical value bytes, enough of it for the
 * preview pane: tables arrive fully inside the JSON header, geometry
 * kinds only need their header metadata surfaced.
 *
 * Layout: "XDV1" | u8 kind-name length | kind name | u32le header length
 * | header JSON (utf-8) | binary blob.
 */
import type { FilterWire, TablePayload, TableRow } from "./types";

const MAGIC = "XDV1";

export interface DecodedValue {
  kind: string;
  header: Record<string, unknown>;
  blobLength: number;
}

export class ValueDecodeError extends Error {}

export function decodeValue(bytes: Uint8Array): DecodedValue {
  if (bytes.length < 9) throw new ValueDecodeError("value too short");
  const ascii = new TextDecoder("ascii");
  if (ascii.decode(bytes.subarray(0, 4)) !== MAGIC) {
    throw new ValueDecodeError("magic mismatch");
  }
  const klen = bytes[4]!;
  let off = 5;
  const kind = ascii.decode(bytes.subarray(off, off + klen));
  off += klen;
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const hlen = view.getUint32(off, true);
  off += 4;
  const headerText = new TextDecoder("utf-8").decode(
    bytes.subarray(off, off + hlen),
  );
  let header: Record<string, unknown>;
  try {
    header = JSON.parse(headerText);
  } catch (e) {
    throw new ValueDecodeError(`bad header JSON: ${e}`);
  }
  return { kind, header, blobLength: bytes.length - off - hlen };
}

export function decodeTable(bytes: Uint8Array): TablePayload {
  const value = decodeValue(bytes);
  if (value.kind !== "Table") {
    throw new ValueDecodeError(`expected Table bytes, got ${value.kind}`);
  }
  const h = value.header as unknown as TablePayload;
  if (!Array.isArray(h.columns) || !Array.isArray(h.rows)) {
    throw new ValueDecodeError("table header is missing columns/rows");
  }
  return h;
}

/**
 * Rows that survive the spec's filters, original order kept. Toggle
 * filters hide exact values of a field; threshold filters keep rows
 * with lo <= value <= hi. Same semantics the server renders by.
 */
export function visibleRows(rows: TableRow[], filters: FilterWire[]): TableRow[] {
  const excluded = new Map<string, Set<unknown>>();
  const thresholds: [string, number, number][] = [];
  for (const f of filters) {
    if (f.type === "toggle") {
      const set = excluded.get(f.field) ?? new Set();
      set.add(f.value);
      excluded.set(f.field, set);
    } else if (f.type === "threshold") {
      thresholds.push([f.field, f.lo, f.hi]);
    }
  }
  return rows.filter((row) => {
    for (const [field, values] of excluded) {
      if (field in row && values.has(row[field])) return false;
    }
    for (const [field, lo, hi] of thresholds) {
      if (!(field in row)) continue;
      const v = Number(row[field]);
      if (!(lo <= v && v <= hi)) return false;
    }
    return true;
  });
}
