/**
 * Annotator tool state: one active tool at a time, a brush radius, the
 * viewport, the selected stage and the overlay opacity.
 */

import { MaskLabel } from "./maskRaster.js";
import type { StageName } from "./params.js";
import { Viewport, makeViewport } from "./viewport.js";

export type Tool = "seed" | "brush" | "edge-red" | "edge-white" | "rim-green" | "eraser";

/** Wire label names for painting tools (seed clicks are not strokes). */
export const TOOL_STROKE_LABEL: Record<Exclude<Tool, "seed">, string> = {
  brush: "inpaint",
  "edge-red": "neumann",
  "edge-white": "zero_drift",
  "rim-green": "dirichlet",
  eraser: "keep",
};

export const TOOL_MASK_LABEL: Record<Exclude<Tool, "seed">, MaskLabel> = {
  brush: MaskLabel.Inpaint,
  "edge-red": MaskLabel.NeumannEdge,
  "edge-white": MaskLabel.ZeroDriftEdge,
  "rim-green": MaskLabel.DirichletRim,
  eraser: MaskLabel.Keep,
};

export interface ToolState {
  tool: Tool;
  brushRadius: number;
  view: Viewport;
  stage: StageName;
  overlayOpacity: number;
}

export function initialToolState(): ToolState {
  return {
    tool: "seed",
    brushRadius: 3,
    view: makeViewport(),
    stage: "d1",
    overlayOpacity: 0.5,
  };
}

export function setTool(state: ToolState, tool: Tool): ToolState {
  return { ...state, tool };
}

export function setBrushRadius(state: ToolState, radius: number): ToolState {
  return { ...state, brushRadius: Math.max(0.5, radius) };
}

export function setOverlayOpacity(state: ToolState, opacity: number): ToolState {
  return { ...state, overlayOpacity: Math.min(Math.max(opacity, 0), 1) };
}

export function setStage(state: ToolState, stage: StageName): ToolState {
  return { ...state, stage };
}

export function setView(state: ToolState, view: Viewport): ToolState {
  if (!(view.zoom > 0)) throw new Error("zoom must stay positive");
  return { ...state, view };
}
