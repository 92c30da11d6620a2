// DOM shell: node panel on the left, SVG canvas in the middle, inspector
// and preview on the right, workspace toolbar on top. All state changes
// go through CanvasGraph; this file only paints and forwards events.
import { GatewayClient, GatewayError } from "./api";
import { CanvasGraph, MirrorError } from "./mirror";
import { buildPanel } from "./panel";
import { validateEncodingDraft } from "./encoding";
import { decodeTable, decodeValue } from "./table";
import {
  renderChart,
  renderPlaceholder,
  UnsupportedMarkForPreview,
} from "./preview";
import type {
  FileEntry,
  NodeKindInfo,
  NodePosition,
  SpecWire,
} from "./types";

const NODE_W = 148;
const NODE_H = 44;
const PORT_R = 5;
const VERSION_POLL_MS = 4000;

interface DragState {
  kind: "move" | "wire";
  nodeId: string;
  port?: string;
  dx: number;
  dy: number;
}

export class App {
  private graph: CanvasGraph;
  private files: FileEntry[] = [];
  private drag: DragState | null = null;
  private pointer: NodePosition = { x: 0, y: 0 };
  private flash: { x: number; y: number; until: number } | null = null;

  private readonly canvas: SVGSVGElement;
  private readonly inspector: HTMLElement;
  private readonly previewPane: HTMLElement;
  private readonly statusLine: HTMLElement;
  private readonly banner: HTMLElement;
  private readonly codeInput: HTMLInputElement;

  constructor(
    private readonly client: GatewayClient,
    private readonly specs: NodeKindInfo[],
    root: HTMLElement,
  ) {
    this.graph = new CanvasGraph(specs);
    root.innerHTML = `
      <header id="toolbar">
        <span class="brand">xrflow</span>
        <input id="code" placeholder="access code" value="untitled"/>
        <button id="load">Load</button>
        <button id="save">Save</button>
        <button id="new">New</button>
        <span id="status"></span>
      </header>
      <div id="banner" hidden></div>
      <main>
        <nav id="panel"></nav>
        <svg id="canvas" xmlns="http://www.w3.org/2000/svg"></svg>
        <aside id="side">
          <section id="inspector"></section>
          <section id="preview"></section>
        </aside>
      </main>`;
    this.canvas = root.querySelector<SVGSVGElement>("#canvas")!;
    this.inspector = root.querySelector<HTMLElement>("#inspector")!;
    this.previewPane = root.querySelector<HTMLElement>("#preview")!;
    this.statusLine = root.querySelector<HTMLElement>("#status")!;
    this.banner = root.querySelector<HTMLElement>("#banner")!;
    this.codeInput = root.querySelector<HTMLInputElement>("#code")!;

    this.buildPanelDom(root.querySelector<HTMLElement>("#panel")!);
    this.wireToolbar(root);
    this.wireCanvas();
    this.paint();

    void this.refreshFiles();
    window.setInterval(() => void this.pollVersion(), VERSION_POLL_MS);
  }

  // ------------------------------------------------------------- panel

  private buildPanelDom(panel: HTMLElement): void {
    for (const group of buildPanel({ nodes: this.specs })) {
      const h = document.createElement("h3");
      h.textContent = group.category;
      panel.appendChild(h);
      for (const entry of group.entries) {
        const b = document.createElement("button");
        b.className = "panel-node";
        b.textContent = entry.kind;
        b.title = entry.description;
        b.addEventListener("click", () => this.addFromPanel(entry.kind));
        panel.appendChild(b);
      }
    }
  }

  private addFromPanel(kind: string): void {
    const x = 40 + (this.graph.nodes.length % 4) * (NODE_W + 24);
    const y = 40 + Math.floor(this.graph.nodes.length / 4) * (NODE_H + 40);
    try {
      const id = this.graph.addNode(kind, { x, y });
      this.graph.selection = id;
      this.paint();
    } catch (e) {
      this.say(String(e));
    }
  }

  // ----------------------------------------------------------- toolbar

  private wireToolbar(root: HTMLElement): void {
    root.querySelector("#save")!.addEventListener("click", () => {
      this.graph.code = this.codeInput.value.trim() || "untitled";
      this.graph
        .save(this.client)
        .then(() => this.say(`saved ${this.graph.code} v${this.graph.version}`))
        .catch((e) => this.sayError(e));
    });
    root.querySelector("#load")!.addEventListener("click", () => {
      const code = this.codeInput.value.trim();
      if (!code) return this.say("enter an access code");
      this.graph
        .load(this.client, code)
        .then(() => {
          this.say(`loaded ${code} v${this.graph.version}`);
          this.hideBanner();
          this.paint();
        })
        .catch((e) => this.sayError(e));
    });
    root.querySelector("#new")!.addEventListener("click", () => {
      this.graph = new CanvasGraph(this.specs, this.codeInput.value.trim() || "untitled");
      this.hideBanner();
      this.say("new workspace");
      this.paint();
    });
    document.addEventListener("keydown", (ev) => {
      if (ev.key !== "Delete" && ev.key !== "Backspace") return;
      if (ev.target instanceof HTMLInputElement) return;
      if (ev.target instanceof HTMLTextAreaElement) return;
      const sel = this.graph.selection;
      if (sel) {
        this.graph.deleteNode(sel);
        this.paint();
      }
    });
  }

  private async pollVersion(): Promise<void> {
    try {
      const record = await this.client.loadWorkspace(this.graph.code);
      if (record.version > this.graph.version) {
        this.banner.textContent =
          `workspace ${this.graph.code} was saved elsewhere (v${record.version}); ` +
          `load to pick up the changes`;
        this.banner.hidden = false;
      }
    } catch {
      // unknown code or transient failure; nothing to announce
    }
  }

  private hideBanner(): void {
    this.banner.hidden = true;
  }

  private async refreshFiles(): Promise<void> {
    try {
      this.files = (await this.client.listFiles()).files;
    } catch {
      this.files = [];
    }
  }

  // ------------------------------------------------------------ canvas

  private wireCanvas(): void {
    this.canvas.addEventListener("mousedown", (ev) => {
      const t = ev.target as SVGElement;
      const nodeId = t.dataset.node;
      if (!nodeId) {
        this.graph.selection = null;
        this.paint();
        return;
      }
      const pos = this.graph.layout[nodeId] ?? { x: 0, y: 0 };
      if (t.dataset.out) {
        this.drag = { kind: "wire", nodeId, port: t.dataset.out, dx: 0, dy: 0 };
      } else {
        this.graph.selection = nodeId;
        this.drag = {
          kind: "move",
          nodeId,
          dx: ev.offsetX - pos.x,
          dy: ev.offsetY - pos.y,
        };
      }
      this.paint();
    });
    this.canvas.addEventListener("mousemove", (ev) => {
      this.pointer = { x: ev.offsetX, y: ev.offsetY };
      if (!this.drag) return;
      if (this.drag.kind === "move") {
        this.graph.moveNode(this.drag.nodeId, {
          x: ev.offsetX - this.drag.dx,
          y: ev.offsetY - this.drag.dy,
        });
      }
      this.paint();
    });
    this.canvas.addEventListener("mouseup", (ev) => {
      const drag = this.drag;
      this.drag = null;
      if (!drag || drag.kind !== "wire") {
        this.paint();
        return;
      }
      const t = ev.target as SVGElement;
      if (t.dataset.node && t.dataset.in) {
        const verdict = this.graph.canConnect(
          drag.nodeId,
          drag.port!,
          t.dataset.node,
          t.dataset.in,
        );
        if (verdict.ok) {
          this.graph.connect(drag.nodeId, drag.port!, t.dataset.node, t.dataset.in);
        } else {
          // rejected connects never reach the server; flash the port red
          this.flash = { x: ev.offsetX, y: ev.offsetY, until: Date.now() + 900 };
          this.say(verdict.reason);
        }
      }
      this.paint();
    });
  }

  private portY(i: number, total: number): number {
    return (NODE_H / (total + 1)) * (i + 1);
  }

  private paint(): void {
    const parts: string[] = [];
    for (const e of this.graph.edges) {
      const a = this.graph.layout[e.src];
      const b = this.graph.layout[e.dst];
      if (!a || !b) continue;
      const spec = this.graph.spec(this.graph.node(e.src).kind);
      const dspec = this.graph.spec(this.graph.node(e.dst).kind);
      const oi = spec.outputs.findIndex((p) => p.name === e.src_port);
      const ii = dspec.inputs.findIndex((p) => p.name === e.dst_port);
      const x1 = a.x + NODE_W;
      const y1 = a.y + this.portY(oi, spec.outputs.length);
      const x2 = b.x;
      const y2 = b.y + this.portY(ii, dspec.inputs.length);
      const mid = (x1 + x2) / 2;
      parts.push(
        `<path class="edge" d="M ${x1} ${y1} C ${mid} ${y1}, ${mid} ${y2}, ${x2} ${y2}"/>`,
      );
    }
    if (this.drag?.kind === "wire") {
      const a = this.graph.layout[this.drag.nodeId];
      if (a) {
        parts.push(
          `<path class="edge pending" d="M ${a.x + NODE_W} ${a.y + NODE_H / 2} L ${this.pointer.x} ${this.pointer.y}"/>`,
        );
      }
    }
    for (const n of this.graph.nodes) {
      const pos = this.graph.layout[n.id] ?? { x: 20, y: 20 };
      const badge = this.graph.status.get(n.id)?.badge ?? "dirty";
      const sel = this.graph.selection === n.id ? " selected" : "";
      const spec = this.graph.spec(n.kind);
      parts.push(
        `<g transform="translate(${pos.x},${pos.y})">`,
        `<rect class="node ${badge}${sel}" width="${NODE_W}" height="${NODE_H}" rx="6" data-node="${n.id}"/>`,
        `<text class="node-kind" x="8" y="18" data-node="${n.id}">${n.kind}</text>`,
        `<text class="node-id" x="8" y="34" data-node="${n.id}">${n.id}</text>`,
      );
      spec.inputs.forEach((p, i) => {
        parts.push(
          `<circle class="port in" cx="0" cy="${this.portY(i, spec.inputs.length)}" r="${PORT_R}" data-node="${n.id}" data-in="${p.name}"><title>${p.name}</title></circle>`,
        );
      });
      spec.outputs.forEach((p, i) => {
        parts.push(
          `<circle class="port out" cx="${NODE_W}" cy="${this.portY(i, spec.outputs.length)}" r="${PORT_R}" data-node="${n.id}" data-out="${p.name}"><title>${p.name}</title></circle>`,
        );
      });
      parts.push("</g>");
    }
    if (this.flash && Date.now() < this.flash.until) {
      parts.push(
        `<circle class="reject" cx="${this.flash.x}" cy="${this.flash.y}" r="10"/>`,
      );
    }
    this.canvas.innerHTML = parts.join("");
    this.paintInspector();
  }

  // --------------------------------------------------------- inspector

  private paintInspector(): void {
    const id = this.graph.selection;
    this.inspector.innerHTML = "";
    if (!id) {
      this.inspector.innerHTML = "<p class='hint'>select a node</p>";
      return;
    }
    const node = this.graph.node(id);
    const spec = this.graph.spec(node.kind);
    const status = this.graph.status.get(id);

    const title = document.createElement("h3");
    title.textContent = `${node.kind} (${id})`;
    this.inspector.appendChild(title);
    if (status?.error) {
      const err = document.createElement("p");
      err.className = "node-error";
      err.textContent = status.error;
      this.inspector.appendChild(err);
    }

    if (node.kind === "VisualEncoding") {
      this.encodingEditor(id);
    } else {
      for (const p of spec.params) {
        this.paramField(id, p.name, p.type, node.params[p.name]);
      }
    }

    const run = document.createElement("button");
    run.textContent = "Execute";
    run.addEventListener("click", () => {
      this.graph
        .execute(this.client, id)
        .then((report) => {
          this.say(
            report.errors.length
              ? `execution had ${report.errors.length} error(s)`
              : `executed ${report.executed.length} node(s)`,
          );
          this.paint();
          void this.showPreview(id);
        })
        .catch((e) => this.sayError(e));
    });
    this.inspector.appendChild(run);
  }

  private paramField(id: string, name: string, type: string, value: unknown): void {
    const label = document.createElement("label");
    label.textContent = name;
    let input: HTMLInputElement | HTMLSelectElement;
    const isPath = name === "path";
    if (isPath && this.files.length) {
      const select = document.createElement("select");
      for (const f of this.files) {
        const opt = document.createElement("option");
        opt.value = f.name;
        opt.textContent = `${f.name} (${f.size} bytes)`;
        if (f.name === value) opt.selected = true;
        select.appendChild(opt);
      }
      input = select;
    } else {
      const text = document.createElement("input");
      text.value = type === "json" ? JSON.stringify(value ?? null) : String(value ?? "");
      input = text;
    }
    input.addEventListener("change", () => {
      let parsed: unknown = input.value;
      if (type === "number") parsed = Number(input.value);
      if (type === "boolean") parsed = input.value === "true";
      if (type === "json") {
        try {
          parsed = JSON.parse(input.value);
        } catch {
          return this.say(`${name}: not valid JSON`);
        }
      }
      try {
        this.graph.editParams(id, { [name]: parsed });
        this.paint();
      } catch (e) {
        this.say(e instanceof MirrorError ? e.message : String(e));
      }
    });
    label.appendChild(input);
    this.inspector.appendChild(label);
  }

  private encodingEditor(id: string): void {
    const node = this.graph.node(id);
    const area = document.createElement("textarea");
    area.rows = 10;
    area.value = JSON.stringify(node.params, null, 2);
    const diag = document.createElement("pre");
    diag.className = "diagnostics";
    const apply = document.createElement("button");
    apply.textContent = "Apply encoding";
    apply.addEventListener("click", () => {
      const result = validateEncodingDraft(area.value);
      if (!result.ok) {
        diag.textContent = result.diagnostics
          .map((d) => (d.path ? `${d.path}: ${d.message}` : d.message))
          .join("\n");
        return;
      }
      diag.textContent = "";
      try {
        const node = this.graph.node(id);
        node.params = result.value!;
        this.graph.editParams(id, {});
        this.paint();
      } catch (e) {
        diag.textContent = String(e);
      }
    });
    this.inspector.append(area, diag, apply);
  }

  // ----------------------------------------------------------- preview

  private async showPreview(nodeId: string): Promise<void> {
    this.previewPane.innerHTML = "";
    const node = this.graph.nodes.find((n) => n.id === nodeId);
    if (!node || node.kind !== "VisualEncoding") return;
    try {
      const out = this.graph.lastOutputs[nodeId]?.spec;
      if (!out?.hash) return;
      const specBytes = await this.client.fetchData(out.hash);
      const spec = decodeValue(specBytes.bytes).header as unknown as SpecWire;
      const data = await this.client.fetchData(spec.data_ref);
      if (data.kind === "Table") {
        const table = decodeTable(data.bytes);
        this.previewPane.innerHTML = renderChart(spec, table.rows);
      } else {
        const meta = decodeValue(data.bytes).header;
        this.previewPane.innerHTML = renderPlaceholder(spec, meta);
      }
    } catch (e) {
      if (e instanceof UnsupportedMarkForPreview) {
        this.previewPane.textContent = e.message;
      } else {
        this.sayError(e);
      }
    }
  }

  // ------------------------------------------------------------- misc

  private say(text: string): void {
    this.statusLine.textContent = text;
  }

  private sayError(e: unknown): void {
    if (e instanceof GatewayError) {
      this.say(`${e.kind}: ${e.message}`);
    } else {
      this.say(String(e));
    }
  }
}
