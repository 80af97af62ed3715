/**
 * Local raster model of the annotation mask.
 *
 * Painting mirrors the service's rasterization exactly (same brush rule:
 * a pixel is painted when its center lies within max(radius, 0.5) of the
 * stroke polyline), so the optimistic overlay matches what the service
 * returns on the next artifact fetch.
 */

export enum MaskLabel {
  Keep = 0,
  Inpaint = 1,
  Training = 2,
  NeumannEdge = 3,
  ZeroDriftEdge = 4,
  DirichletRim = 5,
}

/** Bit-exact annotation color table shared with the service. */
export const LABEL_COLORS: Record<MaskLabel, [number, number, number]> = {
  [MaskLabel.Keep]: [0, 0, 0],
  [MaskLabel.Inpaint]: [128, 128, 128],
  [MaskLabel.Training]: [0, 0, 255],
  [MaskLabel.NeumannEdge]: [255, 0, 0],
  [MaskLabel.ZeroDriftEdge]: [255, 255, 255],
  [MaskLabel.DirichletRim]: [0, 255, 0],
};

export function labelFromColor(r: number, g: number, b: number): MaskLabel | null {
  for (const key of Object.keys(LABEL_COLORS)) {
    const label = Number(key) as MaskLabel;
    const [cr, cg, cb] = LABEL_COLORS[label];
    if (cr === r && cg === g && cb === b) return label;
  }
  return null;
}

export interface StrokePoint {
  x: number;
  y: number;
}

export class MaskRaster {
  readonly width: number;
  readonly height: number;
  readonly labels: Uint8Array;

  constructor(width: number, height: number, labels?: Uint8Array) {
    this.width = width;
    this.height = height;
    if (labels !== undefined && labels.length !== width * height) {
      throw new Error(`label buffer length ${labels.length} != ${width * height}`);
    }
    this.labels = labels ?? new Uint8Array(width * height);
  }

  at(x: number, y: number): MaskLabel {
    return this.labels[y * this.width + x] as MaskLabel;
  }

  /** Paint a polyline with a round brush; single points paint a disc. */
  paintStroke(points: StrokePoint[], radius: number, label: MaskLabel): void {
    if (points.length === 0) return;
    const r = Math.max(radius, 0.5);
    const segments: Array<[StrokePoint, StrokePoint]> =
      points.length > 1
        ? points.slice(1).map((p, i) => [points[i], p] as [StrokePoint, StrokePoint])
        : [[points[0], points[0]]];

    for (const [a, b] of segments) {
      const loX = Math.max(Math.floor(Math.min(a.x, b.x) - r), 0);
      const hiX = Math.min(Math.ceil(Math.max(a.x, b.x) + r) + 1, this.width);
      const loY = Math.max(Math.floor(Math.min(a.y, b.y) - r), 0);
      const hiY = Math.min(Math.ceil(Math.max(a.y, b.y) + r) + 1, this.height);
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const norm = dx * dx + dy * dy;
      for (let y = loY; y < hiY; y++) {
        for (let x = loX; x < hiX; x++) {
          let ddx: number;
          let ddy: number;
          if (norm === 0) {
            ddx = x - a.x;
            ddy = y - a.y;
          } else {
            let t = ((x - a.x) * dx + (y - a.y) * dy) / norm;
            t = Math.min(Math.max(t, 0), 1);
            ddx = x - a.x - t * dx;
            ddy = y - a.y - t * dy;
          }
          if (ddx * ddx + ddy * ddy <= r * r) {
            this.labels[y * this.width + x] = label;
          }
        }
      }
    }
  }

  /** Replace the whole field (e.g. after re-downloading the annotation). */
  load(labels: Uint8Array): void {
    if (labels.length !== this.labels.length) {
      throw new Error("label buffer size mismatch");
    }
    this.labels.set(labels);
  }

  equals(other: MaskRaster): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.labels.length; i++) {
      if (this.labels[i] !== other.labels[i]) return false;
    }
    return true;
  }

  /** RGBA overlay; keep pixels stay transparent, others use the color
   * table at the given opacity. */
  toOverlay(opacity: number): Uint8ClampedArray<ArrayBuffer> {
    const alpha = Math.round(Math.min(Math.max(opacity, 0), 1) * 255);
    const out = new Uint8ClampedArray(this.width * this.height * 4);
    for (let i = 0; i < this.labels.length; i++) {
      const label = this.labels[i] as MaskLabel;
      if (label === MaskLabel.Keep) continue;
      const [r, g, b] = LABEL_COLORS[label];
      out[i * 4] = r;
      out[i * 4 + 1] = g;
      out[i * 4 + 2] = b;
      out[i * 4 + 3] = alpha;
    }
    return out;
  }

  /** Decode from RGBA samples (e.g. canvas getImageData of the PNG). */
  static fromRgba(width: number, height: number, rgba: Uint8ClampedArray | Uint8Array): MaskRaster {
    const labels = new Uint8Array(width * height);
    for (let i = 0; i < width * height; i++) {
      const label = labelFromColor(rgba[i * 4], rgba[i * 4 + 1], rgba[i * 4 + 2]);
      if (label === null) {
        const x = i % width;
        const y = Math.floor(i / width);
        throw new Error(
          `unknown annotation color (${rgba[i * 4]},${rgba[i * 4 + 1]},${rgba[i * 4 + 2]}) at (${x},${y})`,
        );
      }
      labels[i] = label;
    }
    return new MaskRaster(width, height, labels);
  }
}
