/** Minimal deterministic SVG line charts (no DOM, no randomness). */

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
}

const PALETTE = ["#1f5fa8", "#c44e52", "#55a868", "#8172b2", "#b8860b",
  "#4c72b0", "#937860", "#da8bc3"];
const MARGIN = { left: 74, right: 20, top: 42, bottom: 52 };

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.04 * (hi - lo);
  return [lo - pad, hi + pad];
}

function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;")
    .replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function lineChart(series: Series[], options: ChartOptions): string {
  const width = options.width ?? 720;
  const height = options.height ?? 460;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const [x0, x1] = extent(series.flatMap((s) => s.x));
  const [y0, y1] = extent(series.flatMap((s) => s.y));
  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * innerW;
  const sy = (y: number) => MARGIN.top + innerH - ((y - y0) / (y1 - y0)) * innerH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(`<text x="${width / 2}" y="24" text-anchor="middle" ` +
    `font-size="16">${escapeXml(options.title)}</text>`);

  // axes and ticks
  const axis = `stroke="#444444" stroke-width="1"`;
  parts.push(`<line x1="${MARGIN.left}" y1="${MARGIN.top + innerH}" ` +
    `x2="${MARGIN.left + innerW}" y2="${MARGIN.top + innerH}" ${axis}/>`);
  parts.push(`<line x1="${MARGIN.left}" y1="${MARGIN.top}" ` +
    `x2="${MARGIN.left}" y2="${MARGIN.top + innerH}" ${axis}/>`);
  for (let k = 0; k <= 4; k += 1) {
    const xv = x0 + ((x1 - x0) * k) / 4;
    const yv = y0 + ((y1 - y0) * k) / 4;
    const px = sx(xv);
    const py = sy(yv);
    parts.push(`<line x1="${px.toFixed(2)}" y1="${MARGIN.top + innerH}" ` +
      `x2="${px.toFixed(2)}" y2="${MARGIN.top + innerH + 5}" ${axis}/>`);
    parts.push(`<text x="${px.toFixed(2)}" y="${MARGIN.top + innerH + 20}" ` +
      `text-anchor="middle" font-size="11">${fmt(xv)}</text>`);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py.toFixed(2)}" ` +
      `x2="${MARGIN.left}" y2="${py.toFixed(2)}" ${axis}/>`);
    parts.push(`<text x="${MARGIN.left - 9}" y="${(py + 4).toFixed(2)}" ` +
      `text-anchor="end" font-size="11">${fmt(yv)}</text>`);
  }
  parts.push(`<text x="${MARGIN.left + innerW / 2}" y="${height - 14}" ` +
    `text-anchor="middle" font-size="13">${escapeXml(options.xLabel)}</text>`);
  parts.push(`<text x="20" y="${MARGIN.top + innerH / 2}" font-size="13" ` +
    `text-anchor="middle" transform="rotate(-90 20 ` +
    `${MARGIN.top + innerH / 2})">${escapeXml(options.yLabel)}</text>`);

  series.forEach((s, k) => {
    const color = PALETTE[k % PALETTE.length];
    const pts = s.x
      .map((x, i) => `${sx(x).toFixed(3)},${sy(s.y[i]).toFixed(3)}`)
      .join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" ` +
      `stroke-width="1.6"/>`);
    const ly = MARGIN.top + 8 + 16 * k;
    const lx = MARGIN.left + innerW - 160;
    parts.push(`<line x1="${lx}" y1="${ly}" x2="${lx + 22}" y2="${ly}" ` +
      `stroke="${color}" stroke-width="2.5"/>`);
    parts.push(`<text x="${lx + 28}" y="${ly + 4}" font-size="12">` +
      `${escapeXml(s.label)}</text>`);
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
