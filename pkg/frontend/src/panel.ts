import type { NodeKindInfo, RegistryListing } from "./types";

/** One collapsible group in the node panel. */
export interface PanelGroup {
  category: string;
  entries: NodeKindInfo[];
}

// Panel order mirrors the pipeline left to right; categories the server
// invents later sort after these.
const CATEGORY_ORDER = [
  "Device",
  "Input",
  "Processing/Data",
  "Processing/Position",
  "Processing/Sensor",
  "Processing/Encoding",
  "Rendering",
];

export function buildPanel(listing: RegistryListing): PanelGroup[] {
  const groups = new Map<string, NodeKindInfo[]>();
  for (const node of listing.nodes) {
    const bucket = groups.get(node.category);
    if (bucket) bucket.push(node);
    else groups.set(node.category, [node]);
  }
  const rank = (c: string) => {
    const i = CATEGORY_ORDER.indexOf(c);
    return i === -1 ? CATEGORY_ORDER.length : i;
  };
  return [...groups.entries()]
    .sort(([a], [b]) => rank(a) - rank(b) || a.localeCompare(b))
    .map(([category, entries]) => ({
      category,
      entries: [...entries].sort((a, b) => a.kind.localeCompare(b.kind)),
    }));
}

/** Every kind shown on the panel, flattened; for parity checks. */
export function panelKinds(groups: PanelGroup[]): string[] {
  return groups.flatMap((g) => g.entries.map((e) => e.kind));
}
