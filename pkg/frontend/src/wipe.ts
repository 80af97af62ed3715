/**
 * A/B wipe compositing for the artifact viewer: everything left of the
 * slider shows image A, the rest image B.
 */

export function wipeCompose(
  a: Uint8ClampedArray,
  b: Uint8ClampedArray,
  width: number,
  height: number,
  splitX: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (a.length !== width * height * 4 || b.length !== a.length) {
    throw new Error("wipe inputs must be same-size RGBA buffers");
  }
  const split = Math.min(Math.max(Math.round(splitX), 0), width);
  const out = new Uint8ClampedArray(a.length);
  for (let y = 0; y < height; y++) {
    const row = y * width * 4;
    out.set(a.subarray(row, row + split * 4), row);
    out.set(b.subarray(row + split * 4, row + width * 4), row + split * 4);
  }
  return out;
}
