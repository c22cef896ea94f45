/** Symmetric diverging color scale centered at 0, so penalties (the
 * negative half) read as one hue family and bonuses as the other.
 */

const NEGATIVE_END: [number, number, number] = [178, 24, 43]; // red
const CENTER: [number, number, number] = [247, 247, 247]; // near white
const POSITIVE_END: [number, number, number] = [33, 102, 172]; // blue

/** Signed position of a value on the scale, clamped to [-1, 1]. */
export function divergingFraction(value: number, maxAbs: number): number {
  if (maxAbs <= 0 || !Number.isFinite(value)) return 0;
  return Math.max(-1, Math.min(1, value / maxAbs));
}

function mix(
  a: [number, number, number],
  b: [number, number, number],
  t: number,
): [number, number, number] {
  return [
    Math.round(a[0] + (b[0] - a[0]) * t),
    Math.round(a[1] + (b[1] - a[1]) * t),
    Math.round(a[2] + (b[2] - a[2]) * t),
  ];
}

export function divergingColor(value: number, maxAbs: number): string {
  const t = divergingFraction(value, maxAbs);
  const rgb =
    t < 0 ? mix(CENTER, NEGATIVE_END, -t) : mix(CENTER, POSITIVE_END, t);
  return `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
}

/** Largest magnitude in a matrix; 1 when the matrix is empty or flat
 * zero, so callers can divide by it unconditionally. */
export function maxAbsOf(values: number[][]): number {
  let out = 0;
  for (const row of values) {
    for (const v of row) {
      const a = Math.abs(v);
      if (Number.isFinite(a) && a > out) out = a;
    }
  }
  return out > 0 ? out : 1;
}
