import { describe, expect, it } from "vitest";

import { LABEL_COLORS, MaskLabel, MaskRaster, labelFromColor } from "../src/maskRaster.js";

describe("mask raster", () => {
  it("paints a disc for a single point", () => {
    const mask = new MaskRaster(11, 11);
    mask.paintStroke([{ x: 5, y: 5 }], 2, MaskLabel.Inpaint);
    expect(mask.at(5, 5)).toBe(MaskLabel.Inpaint);
    expect(mask.at(7, 5)).toBe(MaskLabel.Inpaint);
    expect(mask.at(8, 5)).toBe(MaskLabel.Keep);
    expect(mask.at(7, 7)).toBe(MaskLabel.Keep); // sqrt(8) > 2
  });

  it("paints along segments with the capsule rule", () => {
    const mask = new MaskRaster(20, 10);
    mask.paintStroke(
      [
        { x: 2, y: 5 },
        { x: 17, y: 5 },
      ],
      1,
      MaskLabel.NeumannEdge,
    );
    for (let x = 2; x <= 17; x++) {
      expect(mask.at(x, 5)).toBe(MaskLabel.NeumannEdge);
      expect(mask.at(x, 4)).toBe(MaskLabel.NeumannEdge);
      expect(mask.at(x, 3)).toBe(MaskLabel.Keep);
    }
  });

  it("zero radius still paints the path", () => {
    const mask = new MaskRaster(8, 8);
    mask.paintStroke(
      [
        { x: 1, y: 1 },
        { x: 6, y: 1 },
      ],
      0,
      MaskLabel.Inpaint,
    );
    for (let x = 1; x <= 6; x++) expect(mask.at(x, 1)).toBe(MaskLabel.Inpaint);
  });

  it("eraser paints keep over existing labels", () => {
    const mask = new MaskRaster(9, 9);
    mask.paintStroke([{ x: 4, y: 4 }], 3, MaskLabel.Inpaint);
    mask.paintStroke([{ x: 4, y: 4 }], 4, MaskLabel.Keep);
    expect(mask.labels.every((v) => v === MaskLabel.Keep)).toBe(true);
  });

  it("clips strokes at the raster border", () => {
    const mask = new MaskRaster(6, 6);
    mask.paintStroke([{ x: 0, y: 0 }], 3, MaskLabel.Training);
    expect(mask.at(0, 0)).toBe(MaskLabel.Training);
    expect(mask.at(5, 5)).toBe(MaskLabel.Keep);
  });

  it("overlay uses the color table and keeps keep transparent", () => {
    const mask = new MaskRaster(2, 1);
    mask.paintStroke([{ x: 1, y: 0 }], 0.5, MaskLabel.ZeroDriftEdge);
    const overlay = mask.toOverlay(0.5);
    expect(Array.from(overlay.subarray(0, 4))).toEqual([0, 0, 0, 0]);
    expect(Array.from(overlay.subarray(4, 8))).toEqual([255, 255, 255, 128]);
  });

  it("round-trips through RGBA encoding", () => {
    const mask = new MaskRaster(5, 4);
    mask.paintStroke([{ x: 1, y: 1 }], 1, MaskLabel.Inpaint);
    mask.paintStroke([{ x: 4, y: 3 }], 0.5, MaskLabel.DirichletRim);
    const rgba = new Uint8ClampedArray(5 * 4 * 4);
    for (let i = 0; i < 20; i++) {
      const [r, g, b] = LABEL_COLORS[mask.labels[i] as MaskLabel];
      rgba.set([r, g, b, 255], i * 4);
    }
    const back = MaskRaster.fromRgba(5, 4, rgba);
    expect(back.equals(mask)).toBe(true);
  });

  it("rejects unknown colors with pixel coordinates", () => {
    const rgba = new Uint8ClampedArray(4);
    rgba.set([7, 7, 7, 255]);
    expect(() => MaskRaster.fromRgba(1, 1, rgba)).toThrow(/\(0,0\)/);
    expect(labelFromColor(128, 128, 128)).toBe(MaskLabel.Inpaint);
    expect(labelFromColor(1, 2, 3)).toBeNull();
  });
});
