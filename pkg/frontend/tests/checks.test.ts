import { describe, expect, it } from "vitest";
import { checkConnect, reachableFrom } from "../src/checks";
import type { EdgeEntry, NodeEntry, WorkflowDocument } from "../src/types";
import { SPECS } from "./helpers";

const specs = new Map(SPECS.map((s) => [s.kind, s]));

function doc(nodes: [string, string][], edges: EdgeEntry[] = []): WorkflowDocument {
  return {
    schema_version: 1,
    access_code: "t",
    nodes: nodes.map(([id, kind]): NodeEntry => ({ id, kind, params: {} })),
    edges,
  };
}

describe("checkConnect", () => {
  it("accepts a matching table edge", () => {
    const d = doc([
      ["n0001", "DataFile"],
      ["n0002", "VisualEncoding"],
    ]);
    expect(checkConnect(d, specs, "n0001", "table", "n0002", "data")).toEqual({
      ok: true,
    });
  });

  it("rejects unknown nodes and ports by name", () => {
    const d = doc([
      ["n0001", "DataFile"],
      ["n0002", "IsoSurface"],
    ]);
    expect(checkConnect(d, specs, "nX", "table", "n0002", "volume").ok).toBe(false);
    expect(checkConnect(d, specs, "n0001", "rows", "n0002", "volume").ok).toBe(false);
    expect(checkConnect(d, specs, "n0001", "table", "n0002", "grid").ok).toBe(false);
  });

  it("rejects kind mismatches", () => {
    const d = doc([
      ["n0001", "DataFile"],
      ["n0002", "IsoSurface"],
    ]);
    const v = checkConnect(d, specs, "n0001", "table", "n0002", "volume");
    expect(v.ok).toBe(false);
    if (!v.ok) expect(v.reason).toContain("Table");
  });

  it("lets the any kind pass in both directions", () => {
    const d = doc([
      ["n0001", "Custom"],
      ["n0002", "IsoSurface"],
      ["n0003", "DataFile"],
    ]);
    expect(checkConnect(d, specs, "n0001", "output", "n0002", "volume").ok).toBe(true);
    expect(checkConnect(d, specs, "n0003", "table", "n0001", "input").ok).toBe(true);
  });

  it("rejects a second edge into an occupied port", () => {
    const d = doc(
      [
        ["n0001", "Image3DFile"],
        ["n0002", "Image3DFile"],
        ["n0003", "IsoSurface"],
      ],
      [{ src: "n0001", src_port: "volume", dst: "n0003", dst_port: "volume" }],
    );
    const v = checkConnect(d, specs, "n0002", "volume", "n0003", "volume");
    expect(v.ok).toBe(false);
    if (!v.ok) expect(v.reason).toContain("incoming");
  });

  it("rejects self loops and longer cycles", () => {
    const d = doc(
      [
        ["n0001", "Custom"],
        ["n0002", "Custom"],
        ["n0003", "Custom"],
      ],
      [
        { src: "n0001", src_port: "output", dst: "n0002", dst_port: "input" },
        { src: "n0002", src_port: "output", dst: "n0003", dst_port: "input" },
      ],
    );
    expect(checkConnect(d, specs, "n0001", "output", "n0001", "input").ok).toBe(false);
    // n0003 -> n0001 closes the 3-cycle; the input port is still free on n0001
    const v = checkConnect(d, specs, "n0003", "output", "n0001", "input");
    expect(v.ok).toBe(false);
    if (!v.ok) expect(v.reason).toContain("cycle");
  });
});

describe("reachableFrom", () => {
  it("collects transitive successors, start excluded", () => {
    const d = doc(
      [
        ["a", "Custom"],
        ["b", "Custom"],
        ["c", "Custom"],
        ["d", "Custom"],
      ],
      [
        { src: "a", src_port: "output", dst: "b", dst_port: "input" },
        { src: "b", src_port: "output", dst: "c", dst_port: "input" },
      ],
    );
    expect(reachableFrom(d, "a")).toEqual(new Set(["b", "c"]));
    expect(reachableFrom(d, "c")).toEqual(new Set());
    expect(reachableFrom(d, "d")).toEqual(new Set());
  });
});
