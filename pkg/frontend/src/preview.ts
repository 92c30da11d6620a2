/**
 * 2D preview of visualization specs, rendered to an SVG string.
 *
 * Tabular marks (point, bar, line, text) become charts. Geometry marks
 * render in XR, not here; they get a placeholder card with the payload
 * metadata so the author can at least confirm what would ship. Preview
 * and headset output are not pixel-comparable and do not try to be.
 */
import type {
  ChannelWire,
  ScaleWire,
  SpecWire,
  TableRow,
} from "./types";
import { visibleRows } from "./table";

export class UnsupportedMarkForPreview extends Error {
  constructor(mark: string) {
    super(`mark ${mark} has no 2D preview`);
    this.name = "UnsupportedMarkForPreview";
  }
}

const TABULAR_MARKS = new Set(["point", "bar", "line", "text"]);
const GEOMETRY_MARKS = new Set(["mesh", "volume", "image"]);

const WIDTH = 420;
const HEIGHT = 300;
const PAD = 36;
const DEFAULT_COLOR = "#4c78a8";

// ------------------------------------------------------------- scales

/** Map a data value through a wire scale onto [0, 1]. */
export function scaleToUnit(scale: ScaleWire, value: unknown): number {
  if (scale.type === "linear") {
    const lo = Number(scale.domain[0]);
    const hi = Number(scale.domain[1]);
    if (!(hi > lo)) return 0.5;
    return (Number(value) - lo) / (hi - lo);
  }
  // ordinal: evenly spaced slots in domain order
  const i = scale.domain.findIndex((d) => d === value);
  const n = scale.domain.length;
  if (i === -1 || n === 0) return 0.5;
  return n === 1 ? 0.5 : i / (n - 1);
}

function colorOf(channel: ChannelWire | undefined, row: TableRow): string {
  if (!channel) return DEFAULT_COLOR;
  const { scale } = channel;
  const value = row[channel.field];
  if (scale.type === "ordinal") {
    const i = scale.domain.findIndex((d) => d === value);
    const hit = i !== -1 ? scale.range[i] : undefined;
    return typeof hit === "string" ? hit : DEFAULT_COLOR;
  }
  // linear color: blend the 2-stop ramp
  const t = clamp01(scaleToUnit(scale, value));
  const lo = String(scale.range[0] ?? DEFAULT_COLOR);
  const hi = String(scale.range[1] ?? DEFAULT_COLOR);
  return blendHex(lo, hi, t);
}

function sizeOf(channel: ChannelWire | undefined, row: TableRow): number {
  if (!channel) return 4;
  const t = clamp01(scaleToUnit(channel.scale, row[channel.field]));
  return 2 + t * 10;
}

function clamp01(v: number): number {
  return Number.isFinite(v) ? Math.min(1, Math.max(0, v)) : 0.5;
}

function blendHex(a: string, b: string, t: number): string {
  const pa = parseHex(a);
  const pb = parseHex(b);
  if (!pa || !pb) return a;
  const mix = pa.map((x, i) => Math.round(x + (pb[i]! - x) * t));
  return "#" + mix.map((x) => x.toString(16).padStart(2, "0")).join("");
}

function parseHex(c: string): [number, number, number] | null {
  const m = /^#([0-9a-f]{6})$/i.exec(c);
  if (!m) return null;
  const v = parseInt(m[1]!, 16);
  return [(v >> 16) & 255, (v >> 8) & 255, v & 255];
}

// ---------------------------------------------------------- rendering

function esc(s: unknown): string {
  return String(s)
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function px(unit: number): number {
  return PAD + clamp01(unit) * (WIDTH - 2 * PAD);
}

function py(unit: number): number {
  // SVG y grows downward; data y grows upward
  return HEIGHT - PAD - clamp01(unit) * (HEIGHT - 2 * PAD);
}

function open(): string[] {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} ${HEIGHT}" class="preview">`,
    `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
    `<rect x="${PAD}" y="${PAD}" width="${WIDTH - 2 * PAD}" height="${HEIGHT - 2 * PAD}" fill="none" stroke="#ccc"/>`,
  ];
}

/**
 * Render a tabular spec over its (already fetched) rows. Filters on the
 * spec are applied here with the same semantics the server uses, so the
 * visible element count always equals the server-side filtered count.
 */
export function renderChart(spec: SpecWire, rows: TableRow[]): string {
  if (GEOMETRY_MARKS.has(spec.mark)) {
    throw new UnsupportedMarkForPreview(spec.mark);
  }
  if (!TABULAR_MARKS.has(spec.mark)) {
    throw new UnsupportedMarkForPreview(spec.mark);
  }
  const shown = visibleRows(rows, spec.filters ?? []);
  const x = spec.channels.x;
  const y = spec.channels.y;
  const color = spec.channels.color;
  const size = spec.channels.size;
  const parts = open();

  if (spec.mark === "point") {
    for (const row of shown) {
      const cx = x ? px(scaleToUnit(x.scale, row[x.field])) : WIDTH / 2;
      const cy = y ? py(scaleToUnit(y.scale, row[y.field])) : HEIGHT / 2;
      parts.push(
        `<circle cx="${cx.toFixed(1)}" cy="${cy.toFixed(1)}" r="${sizeOf(size, row).toFixed(1)}" fill="${colorOf(color, row)}"/>`,
      );
    }
  } else if (spec.mark === "bar") {
    const n = Math.max(shown.length, 1);
    const band = (WIDTH - 2 * PAD) / n;
    shown.forEach((row, i) => {
      const h = y ? clamp01(scaleToUnit(y.scale, row[y.field])) : 0.5;
      const bx = PAD + i * band + band * 0.125;
      const bh = h * (HEIGHT - 2 * PAD);
      parts.push(
        `<rect x="${bx.toFixed(1)}" y="${(HEIGHT - PAD - bh).toFixed(1)}" width="${(band * 0.75).toFixed(1)}" height="${bh.toFixed(1)}" fill="${colorOf(color, row)}"/>`,
      );
    });
  } else if (spec.mark === "line") {
    const pts = shown
      .map((row) => {
        const cx = x ? px(scaleToUnit(x.scale, row[x.field])) : WIDTH / 2;
        const cy = y ? py(scaleToUnit(y.scale, row[y.field])) : HEIGHT / 2;
        return `${cx.toFixed(1)},${cy.toFixed(1)}`;
      })
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${DEFAULT_COLOR}" stroke-width="2"/>`,
    );
  } else {
    // text mark
    const t = spec.channels.text;
    for (const row of shown) {
      const cx = x ? px(scaleToUnit(x.scale, row[x.field])) : WIDTH / 2;
      const cy = y ? py(scaleToUnit(y.scale, row[y.field])) : HEIGHT / 2;
      const label = t ? row[t.field] : "";
      parts.push(
        `<text x="${cx.toFixed(1)}" y="${cy.toFixed(1)}" font-size="11">${esc(label)}</text>`,
      );
    }
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Metadata card for marks that only render in the headset. */
export function renderPlaceholder(
  spec: SpecWire,
  meta: Record<string, unknown>,
): string {
  if (!GEOMETRY_MARKS.has(spec.mark)) {
    throw new UnsupportedMarkForPreview(spec.mark);
  }
  const lines = Object.entries(meta)
    .slice(0, 6)
    .map(
      ([k, v], i) =>
        `<text x="20" y="${64 + i * 18}" font-size="12" fill="#333">${esc(k)}: ${esc(
          JSON.stringify(v),
        )}</text>`,
    );
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${WIDTH} 180" class="preview placeholder">`,
    `<rect x="4" y="4" width="${WIDTH - 8}" height="172" rx="8" fill="#f4f4f4" stroke="#bbb"/>`,
    `<text x="20" y="32" font-size="14" font-weight="bold">${esc(spec.mark)} mark renders on the device</text>`,
    ...lines,
    "</svg>",
  ].join("");
}

/** Count of drawn data elements in a rendered chart; test hook. */
export function countMarks(svg: string, mark: string): number {
  const tag =
    mark === "point"
      ? "<circle "
      : mark === "bar"
        ? "<rect "
        : mark === "text"
          ? "<text "
          : "<polyline ";
  let n = 0;
  let i = svg.indexOf(tag);
  while (i !== -1) {
    n += 1;
    i = svg.indexOf(tag, i + tag.length);
  }
  // the frame rect is chrome, not data
  return mark === "bar" ? n - 2 : n;
}
