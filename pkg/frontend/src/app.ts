/**
 * Browser wiring: canvas rendering, pointer-driven seed clicks and brush
 * strokes (streamed to the service in segments), the stage panel with
 * parameter forms, job progress, DAG badges and the A/B wipe viewer.
 *
 * Every mask byte displayed comes from the service: after each stroke
 * batch the annotation is re-downloaded and replaces the optimistic
 * local overlay.
 */

import { AnnotationClient, WireStroke } from "./api.js";
import { STAGE_PARENTS, badges } from "./dag.js";
import { MaskRaster } from "./maskRaster.js";
import { STAGE_DEFAULTS, STAGE_ORDER, StageName, buildRunPayload } from "./params.js";
import {
  Tool,
  ToolState,
  TOOL_MASK_LABEL,
  TOOL_STROKE_LABEL,
  initialToolState,
  setBrushRadius,
  setOverlayOpacity,
  setStage,
  setTool,
  setView,
} from "./tools.js";
import { clampToImage, pan, screenToImagePixel, zoomAt } from "./viewport.js";
import { wipeCompose } from "./wipe.js";

const STROKE_BATCH_POINTS = 24;

interface AppState {
  tool: ToolState;
  session: string | null;
  imageBitmap: ImageBitmap | null;
  width: number;
  height: number;
  mask: MaskRaster | null;
  seeds: Array<[number, number]>;
  strokePoints: Array<[number, number]>;
  compareA: ImageData | null;
  compareB: ImageData | null;
  wipeX: number;
}

export class AnnotatorApp {
  private readonly client: AnnotationClient;
  private readonly canvas: HTMLCanvasElement;
  private readonly ctx: CanvasRenderingContext2D;
  private state: AppState;
  private painting = false;

  constructor(serviceUrl: string, canvas: HTMLCanvasElement) {
    this.client = new AnnotationClient(serviceUrl);
    this.canvas = canvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.state = {
      tool: initialToolState(),
      session: null,
      imageBitmap: null,
      width: 0,
      height: 0,
      mask: null,
      seeds: [],
      strokePoints: [],
      compareA: null,
      compareB: null,
      wipeX: 0,
    };
    this.bindPointerEvents();
  }

  // ------------------------------------------------------------------ session

  async openImage(file: Blob): Promise<void> {
    const info = await this.client.createSession(file);
    this.state.session = info.id;
    this.state.width = info.width;
    this.state.height = info.height;
    this.state.mask = new MaskRaster(info.width, info.height);
    this.state.seeds = [];
    const source = await this.client.fetchArtifact(info.id, "source");
    this.state.imageBitmap = await createImageBitmap(new Blob([source], { type: "image/png" }));
    this.render();
  }

  get sessionId(): string {
    if (!this.state.session) throw new Error("no open session");
    return this.state.session;
  }

  // ------------------------------------------------------------------ tools

  selectTool(tool: Tool): void {
    this.state.tool = setTool(this.state.tool, tool);
  }

  setRadius(radius: number): void {
    this.state.tool = setBrushRadius(this.state.tool, radius);
  }

  setOpacity(opacity: number): void {
    this.state.tool = setOverlayOpacity(this.state.tool, opacity);
    this.render();
  }

  selectStage(stage: StageName): void {
    this.state.tool = setStage(this.state.tool, stage);
  }

  zoomBy(factor: number, anchorX: number, anchorY: number): void {
    this.state.tool = setView(
      this.state.tool,
      zoomAt(this.state.tool.view, factor, { x: anchorX, y: anchorY }),
    );
    this.render();
  }

  panBy(dx: number, dy: number): void {
    this.state.tool = setView(this.state.tool, pan(this.state.tool.view, dx, dy));
    this.render();
  }

  // ------------------------------------------------------------------ input

  private bindPointerEvents(): void {
    this.canvas.addEventListener("pointerdown", (event) => void this.onPointerDown(event));
    this.canvas.addEventListener("pointermove", (event) => void this.onPointerMove(event));
    this.canvas.addEventListener("pointerup", () => void this.onPointerUp());
    this.canvas.addEventListener("wheel", (event) => {
      event.preventDefault();
      this.zoomBy(event.deltaY < 0 ? 1.25 : 0.8, event.offsetX, event.offsetY);
    });
  }

  private pixelUnderPointer(event: PointerEvent): [number, number] | null {
    const p = screenToImagePixel(this.state.tool.view, { x: event.offsetX, y: event.offsetY });
    const clamped = clampToImage(p, this.state.width, this.state.height);
    return clamped ? [clamped.x, clamped.y] : null;
  }

  private async onPointerDown(event: PointerEvent): Promise<void> {
    if (!this.state.session) return;
    const pixel = this.pixelUnderPointer(event);
    if (!pixel) return;
    if (this.state.tool.tool === "seed") {
      this.state.seeds.push(pixel);
      await this.client.postSeeds(this.sessionId, this.state.seeds);
      this.render();
      return;
    }
    this.painting = true;
    this.state.strokePoints = [pixel];
    this.paintLocal([pixel]);
  }

  private async onPointerMove(event: PointerEvent): Promise<void> {
    if (!this.painting) return;
    const pixel = this.pixelUnderPointer(event);
    if (!pixel) return;
    this.state.strokePoints.push(pixel);
    this.paintLocal(this.state.strokePoints.slice(-2));
    // Stream long strokes in segments so large masks upload incrementally.
    if (this.state.strokePoints.length >= STROKE_BATCH_POINTS) {
      const batch = this.state.strokePoints;
      this.state.strokePoints = [batch[batch.length - 1]];
      await this.sendStroke(batch);
    }
  }

  private async onPointerUp(): Promise<void> {
    if (!this.painting) return;
    this.painting = false;
    if (this.state.strokePoints.length) {
      await this.sendStroke(this.state.strokePoints);
      this.state.strokePoints = [];
    }
    await this.reloadAnnotation();
  }

  private paintLocal(points: Array<[number, number]>): void {
    const tool = this.state.tool.tool;
    if (tool === "seed" || !this.state.mask) return;
    this.state.mask.paintStroke(
      points.map(([x, y]) => ({ x, y })),
      this.state.tool.brushRadius,
      TOOL_MASK_LABEL[tool],
    );
    this.render();
  }

  private async sendStroke(points: Array<[number, number]>): Promise<void> {
    const tool = this.state.tool.tool;
    if (tool === "seed") return;
    const stroke: WireStroke = {
      label: TOOL_STROKE_LABEL[tool],
      points,
      radius: this.state.tool.brushRadius,
    };
    await this.client.postStrokes(this.sessionId, [stroke]);
  }

  /** Pull the authoritative annotation back and adopt it verbatim. */
  async reloadAnnotation(): Promise<void> {
    const png = await this.client.fetchArtifact(this.sessionId, "annotation");
    const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
    const scratch = document.createElement("canvas");
    scratch.width = bitmap.width;
    scratch.height = bitmap.height;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(bitmap, 0, 0);
    const rgba = sctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
    this.state.mask = MaskRaster.fromRgba(bitmap.width, bitmap.height, rgba);
    this.render();
  }

  // ------------------------------------------------------------------ stages

  async runStage(stage: StageName, overrides: Record<string, number> = {}): Promise<void> {
    const payload = buildRunPayload(stage, overrides);
    const response = await this.client.runStage(this.sessionId, stage, payload);
    if (response.state !== "done") {
      await this.client.waitForJob(this.sessionId, response.job);
    }
  }

  async refreshBadges(container: HTMLElement): Promise<void> {
    const states = await this.client.stageStates(this.sessionId);
    container.replaceChildren();
    const fresh = Object.fromEntries(
      STAGE_ORDER.map((stage) => [stage, states[stage]?.fresh ?? false]),
    ) as Record<StageName, boolean>;
    for (const badge of badges(fresh)) {
      const node = document.createElement("span");
      node.className = `badge ${badge.fresh ? "fresh" : "stale"}`;
      node.textContent = `${badge.stage}${badge.fresh ? "" : " (stale)"}`;
      node.title = `depends on: ${STAGE_PARENTS[badge.stage].join(", ") || "inputs"}`;
      container.appendChild(node);
    }
  }

  buildStageForm(panel: HTMLElement): void {
    panel.replaceChildren();
    for (const stage of STAGE_ORDER) {
      const fieldset = document.createElement("fieldset");
      const legend = document.createElement("legend");
      legend.textContent = stage;
      fieldset.appendChild(legend);
      for (const [key, value] of Object.entries(STAGE_DEFAULTS[stage])) {
        const label = document.createElement("label");
        label.textContent = key;
        const input = document.createElement("input");
        input.type = "number";
        input.step = "any";
        input.value = String(value);
        input.dataset.stage = stage;
        input.dataset.param = key;
        label.appendChild(input);
        fieldset.appendChild(label);
      }
      const run = document.createElement("button");
      run.textContent = `run ${stage}`;
      run.addEventListener("click", () => {
        const overrides: Record<string, number> = {};
        fieldset.querySelectorAll("input").forEach((input) => {
          overrides[input.dataset.param!] = Number(input.value);
        });
        void this.runStage(stage, overrides);
      });
      fieldset.appendChild(run);
      panel.appendChild(fieldset);
    }
  }

  // ------------------------------------------------------------------ compare

  async loadComparison(nameA: string, nameB: string): Promise<void> {
    const [a, b] = await Promise.all([
      this.artifactImageData(nameA),
      this.artifactImageData(nameB),
    ]);
    this.state.compareA = a;
    this.state.compareB = b;
    this.state.wipeX = Math.floor(a.width / 2);
    this.render();
  }

  setWipe(x: number): void {
    this.state.wipeX = x;
    this.render();
  }

  private async artifactImageData(name: string): Promise<ImageData> {
    const png = await this.client.fetchArtifact(this.sessionId, name);
    const bitmap = await createImageBitmap(new Blob([png], { type: "image/png" }));
    const scratch = document.createElement("canvas");
    scratch.width = bitmap.width;
    scratch.height = bitmap.height;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(bitmap, 0, 0);
    return sctx.getImageData(0, 0, bitmap.width, bitmap.height);
  }

  // ------------------------------------------------------------------ render

  render(): void {
    const { view } = this.state.tool;
    this.ctx.imageSmoothingEnabled = view.zoom < 1;
    this.ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    if (this.state.compareA && this.state.compareB) {
      const { width, height } = this.state.compareA;
      const mixed = wipeCompose(
        new Uint8ClampedArray(this.state.compareA.data),
        new Uint8ClampedArray(this.state.compareB.data),
        width,
        height,
        this.state.wipeX,
      );
      this.blitImageData(new ImageData(mixed, width, height));
      return;
    }

    if (this.state.imageBitmap) {
      this.ctx.drawImage(
        this.state.imageBitmap,
        view.offsetX,
        view.offsetY,
        this.state.width * view.zoom,
        this.state.height * view.zoom,
      );
    }
    if (this.state.mask) {
      const overlay = this.state.mask.toOverlay(this.state.tool.overlayOpacity);
      this.blitImageData(new ImageData(overlay, this.state.width, this.state.height));
    }
    this.ctx.fillStyle = "#ff00ff";
    for (const [x, y] of this.state.seeds) {
      const s = { x: (x + 0.5) * view.zoom + view.offsetX, y: (y + 0.5) * view.zoom + view.offsetY };
      this.ctx.beginPath();
      this.ctx.arc(s.x, s.y, 3, 0, 2 * Math.PI);
      this.ctx.fill();
    }
  }

  private blitImageData(data: ImageData): void {
    const { view } = this.state.tool;
    const scratch = document.createElement("canvas");
    scratch.width = data.width;
    scratch.height = data.height;
    scratch.getContext("2d")!.putImageData(data, 0, 0);
    this.ctx.drawImage(
      scratch,
      view.offsetX,
      view.offsetY,
      data.width * view.zoom,
      data.height * view.zoom,
    );
  }
}

export function mount(serviceUrl: string): AnnotatorApp {
  const canvas = document.getElementById("annotator") as HTMLCanvasElement | null;
  if (!canvas) throw new Error("missing #annotator canvas");
  const app = new AnnotatorApp(serviceUrl, canvas);

  const file = document.getElementById("file") as HTMLInputElement | null;
  file?.addEventListener("change", () => {
    const selected = file.files?.[0];
    if (selected) void app.openImage(selected);
  });
  const panel = document.getElementById("stage-panel");
  if (panel) app.buildStageForm(panel);
  const wipe = document.getElementById("wipe") as HTMLInputElement | null;
  wipe?.addEventListener("input", () => app.setWipe(Number(wipe.value)));
  return app;
}
