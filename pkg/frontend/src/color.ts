// Diverging color scale centered at zero: negative device units
// (capacitance up, a sitting liquid) in blue, positive (finger-like
// conductive coupling) in orange, near-white at zero.

const NEGATIVE_END: [number, number, number] = [23, 89, 194];
const MIDPOINT: [number, number, number] = [246, 247, 248];
const POSITIVE_END: [number, number, number] = [214, 94, 17];

function lerp(a: [number, number, number], b: [number, number, number], t: number) {
  return [
    Math.round(a[0] + (b[0] - a[0]) * t),
    Math.round(a[1] + (b[1] - a[1]) * t),
    Math.round(a[2] + (b[2] - a[2]) * t),
  ] as [number, number, number];
}

/** Map a value to RGB under ordered bounds [lo, hi] straddling zero. */
export function divergingColor(
  value: number,
  lo: number,
  hi: number,
): [number, number, number] {
  if (value <= 0) {
    const depth = lo < 0 ? Math.min(value / lo, 1) : 0; // 0 at zero, 1 at lo
    return lerp(MIDPOINT, NEGATIVE_END, depth);
  }
  const height = hi > 0 ? Math.min(value / hi, 1) : 0;
  return lerp(MIDPOINT, POSITIVE_END, height);
}

export function cssColor(value: number, lo: number, hi: number): string {
  const [r, g, b] = divergingColor(value, lo, hi);
  return `rgb(${r},${g},${b})`;
}
