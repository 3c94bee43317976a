/**
 * Minimal deterministic SVG scene building.
 *
 * Figures are assembled as plain strings: fixed canvas, fixed fonts, no
 * timestamps or generated ids, so identical inputs produce byte-identical
 * files. Scales come from d3-scale; this module only turns scaled
 * coordinates into markup.
 */

import type { ScaleContinuousNumeric } from "d3-scale";

export type Scale = ScaleContinuousNumeric<number, number>;

export const WIDTH = 640;
export const HEIGHT = 420;
export const MARGIN = { top: 44, right: 28, bottom: 52, left: 68 };

/** Data area in pixel coordinates (y grows downward). */
export const PLOT = {
  x0: MARGIN.left,
  x1: WIDTH - MARGIN.right,
  y0: MARGIN.top,
  y1: HEIGHT - MARGIN.bottom,
};

/** Line colors, one per series. */
export const PALETTE = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
];

/** Pixel coordinate formatting: two decimals, no trailing zeros, no -0. */
export function fmt(v: number): string {
  const rounded = Number(v.toFixed(2));
  return String(rounded === 0 ? 0 : rounded);
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

type Attrs = Record<string, string | number>;

function attrText(attrs: Attrs): string {
  const parts = Object.entries(attrs).map(
    ([k, v]) => `${k}="${typeof v === "number" ? fmt(v) : escapeXml(v)}"`
  );
  return parts.length > 0 ? " " + parts.join(" ") : "";
}

export function tag(name: string, attrs: Attrs, children?: string[]): string {
  if (children === undefined || children.length === 0) {
    return `<${name}${attrText(attrs)}/>`;
  }
  return `<${name}${attrText(attrs)}>${children.join("")}</${name}>`;
}

// identity attributes (class, stroke, ...) come first, geometry last
export function textEl(x: number, y: number, content: string, attrs: Attrs = {}): string {
  return `<text${attrText({ ...attrs, x, y })}>${escapeXml(content)}</text>`;
}

export function lineEl(
  x1: number,
  y1: number,
  x2: number,
  y2: number,
  attrs: Attrs = {}
): string {
  return tag("line", { ...attrs, x1, y1, x2, y2 });
}

export function circle(cx: number, cy: number, r: number, attrs: Attrs = {}): string {
  return tag("circle", { ...attrs, cx, cy, r });
}

export function polyline(points: Array<[number, number]>, attrs: Attrs = {}): string {
  const coords = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return tag("polyline", { ...attrs, fill: "none", points: coords });
}

export interface AxisTicks {
  values: number[];
  labels: string[];
}

/** Default tick set for a continuous scale. */
export function linearTicks(scale: Scale, count = 6): AxisTicks {
  const values = scale.ticks(count);
  const format = scale.tickFormat(count);
  return { values, labels: values.map((v) => format(v)) };
}

/** Powers-of-ten ticks for a log scale, labeled 1e<k>. */
export function decadeTicks(scale: Scale): AxisTicks {
  const [lo, hi] = scale.domain();
  const kLo = Math.ceil(Math.log10(lo) - 1e-9);
  const kHi = Math.floor(Math.log10(hi) + 1e-9);
  const values: number[] = [];
  const labels: string[] = [];
  for (let k = kLo; k <= kHi; k++) {
    values.push(10 ** k);
    labels.push(`1e${k}`);
  }
  if (values.length >= 2) {
    return { values, labels };
  }
  return linearTicks(scale, 4);
}

export function axisBottom(scale: Scale, ticks: AxisTicks, label: string): string {
  const y = PLOT.y1;
  const parts = [
    lineEl(PLOT.x0, y, PLOT.x1, y, { stroke: "#000", "stroke-width": 1 }),
  ];
  ticks.values.forEach((v, i) => {
    const x = scale(v);
    parts.push(lineEl(x, y, x, y + 5, { stroke: "#000", "stroke-width": 1 }));
    parts.push(
      textEl(x, y + 18, ticks.labels[i], {
        "text-anchor": "middle",
        "font-size": 11,
      })
    );
  });
  parts.push(
    textEl((PLOT.x0 + PLOT.x1) / 2, y + 38, label, {
      "text-anchor": "middle",
      "font-size": 12,
    })
  );
  return parts.join("\n");
}

export function axisLeft(scale: Scale, ticks: AxisTicks, label: string): string {
  const x = PLOT.x0;
  const parts = [
    lineEl(x, PLOT.y0, x, PLOT.y1, { stroke: "#000", "stroke-width": 1 }),
  ];
  ticks.values.forEach((v, i) => {
    const y = scale(v);
    parts.push(lineEl(x - 5, y, x, y, { stroke: "#000", "stroke-width": 1 }));
    parts.push(
      textEl(x - 8, y + 3.5, ticks.labels[i], {
        "text-anchor": "end",
        "font-size": 11,
      })
    );
  });
  const cy = (PLOT.y0 + PLOT.y1) / 2;
  const cx = x - 46;
  parts.push(
    textEl(cx, cy, label, {
      "text-anchor": "middle",
      "font-size": 12,
      transform: `rotate(-90 ${fmt(cx)} ${fmt(cy)})`,
    })
  );
  return parts.join("\n");
}

/** Wrap body fragments into a complete standalone SVG document. */
export function svgDocument(title: string, body: string[]): string {
  const head = [
    `<?xml version="1.0" encoding="UTF-8"?>`,
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`,
    textEl(WIDTH / 2, 24, title, {
      class: "title",
      "text-anchor": "middle",
      "font-size": 14,
    }),
  ];
  return [...head, ...body, "</svg>"].join("\n") + "\n";
}
