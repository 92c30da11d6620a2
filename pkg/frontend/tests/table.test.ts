import { describe, expect, it } from "vitest";
import { decodeTable, decodeValue, ValueDecodeError, visibleRows } from "../src/table";
import type { FilterWire, TableRow } from "../src/types";
import { packValue } from "./helpers";

describe("decodeValue", () => {
  it("round-trips kind, header, and blob length", () => {
    const blob = new Uint8Array([1, 2, 3, 4, 5]);
    const v = decodeValue(packValue("Volume3D", { dims: [2, 2, 2] }, blob));
    expect(v.kind).toBe("Volume3D");
    expect(v.header).toEqual({ dims: [2, 2, 2] });
    expect(v.blobLength).toBe(5);
  });

  it("decodes from a non-zero buffer offset", () => {
    const packed = packValue("Text", { value: "hi" });
    const padded = new Uint8Array(packed.length + 8);
    padded.set(packed, 8);
    expect(decodeValue(padded.subarray(8)).header).toEqual({ value: "hi" });
  });

  it("rejects wrong magic and truncated input", () => {
    const bad = packValue("Text", { value: "x" });
    bad[0] = 0x59;
    expect(() => decodeValue(bad)).toThrow(ValueDecodeError);
    expect(() => decodeValue(new Uint8Array([88, 68]))).toThrow(/short/);
  });
});

describe("decodeTable", () => {
  const payload = {
    columns: ["t", "v"],
    types: { t: "number", v: "number" },
    rows: [
      { t: 0, v: 1.5 },
      { t: 1, v: 2.5 },
    ],
  };

  it("returns the header payload for Table bytes", () => {
    expect(decodeTable(packValue("Table", payload))).toEqual(payload);
  });

  it("refuses other kinds and malformed headers", () => {
    expect(() => decodeTable(packValue("Mesh", payload))).toThrow(/Mesh/);
    expect(() => decodeTable(packValue("Table", { rows: [] }))).toThrow(
      /columns/,
    );
  });
});

describe("visibleRows", () => {
  const rows: TableRow[] = [
    { series: "a", v: 1 },
    { series: "b", v: 2 },
    { series: "a", v: 3 },
    { series: "c", v: 4 },
  ];

  it("keeps everything with no filters", () => {
    expect(visibleRows(rows, [])).toEqual(rows);
  });

  it("toggle hides exact field values, order preserved", () => {
    const shown = visibleRows(rows, [
      { type: "toggle", field: "series", value: "a" },
    ]);
    expect(shown).toEqual([
      { series: "b", v: 2 },
      { series: "c", v: 4 },
    ]);
  });

  it("threshold keeps the closed interval", () => {
    const shown = visibleRows(rows, [
      { type: "threshold", field: "v", lo: 2, hi: 3 },
    ]);
    expect(shown.map((r) => r.v)).toEqual([2, 3]);
  });

  it("filters compose and missing fields pass thresholds", () => {
    const filters: FilterWire[] = [
      { type: "toggle", field: "series", value: "b" },
      { type: "threshold", field: "v", lo: 0, hi: 3 },
      { type: "threshold", field: "absent", lo: 5, hi: 6 },
    ];
    expect(visibleRows(rows, filters)).toEqual([
      { series: "a", v: 1 },
      { series: "a", v: 3 },
    ]);
  });
});
