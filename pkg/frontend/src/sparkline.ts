/** Block-rate sparkline: a bounded series of samples rendered as an SVG
 * polyline path, no charting dependency. */

export const SPARK_CAPACITY = 60;

export function pushBounded(series: number[], value: number, cap = SPARK_CAPACITY): number[] {
  const next = [...series, value];
  return next.length > cap ? next.slice(next.length - cap) : next;
}

/** SVG path for the series scaled into a w x h box; empty series -> "". */
export function sparklinePath(series: number[], width = 120, height = 24): string {
  if (series.length === 0) return "";
  const max = Math.max(...series, 1e-9);
  const step = series.length > 1 ? width / (series.length - 1) : 0;
  return series
    .map((v, i) => {
      const x = (i * step).toFixed(2);
      const y = (height - (v / max) * height).toFixed(2);
      return `${i === 0 ? "M" : "L"}${x},${y}`;
    })
    .join(" ");
}
