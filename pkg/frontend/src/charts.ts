// Minimal SVG helpers: grouped bars for the five OC metrics and step lines
// for boundary overlays. No chart library; the payloads are tiny.

import type { OcRow } from "./api.js";

const METRICS: { key: keyof OcRow; label: string }[] = [
  { key: "pcs", label: "PCS (%)" },
  { key: "pct_at_mtd", label: "% patients at MTD" },
  { key: "pct_above_mtd", label: "% patients above MTD" },
  { key: "risk_overdosing", label: "Risk of overdosing (%)" },
  { key: "risk_poor_allocation", label: "Risk of poor allocation (%)" },
];

const PALETTE = ["#2563eb", "#f59e0b", "#10b981", "#ef4444", "#8b5cf6",
  "#0891b2", "#d946ef", "#84cc16"];

function svgEl(tag: string, attrs: Record<string, string | number>): SVGElement {
  const el = document.createElementNS("http://www.w3.org/2000/svg", tag);
  for (const [k, v] of Object.entries(attrs)) el.setAttribute(k, String(v));
  return el;
}

export function metricBars(rows: OcRow[], scenario: string): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "charts";
  const designs = [...new Set(rows.map((r) => r.design))];
  const scenarioRows = rows.filter((r) => r.scenario === scenario);

  for (const metric of METRICS) {
    const panel = document.createElement("figure");
    const caption = document.createElement("figcaption");
    caption.textContent = `${metric.label} — ${scenario}`;
    const width = 320;
    const height = 150;
    const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}` });
    const barW = Math.min(40, (width - 40) / designs.length - 8);
    designs.forEach((design, i) => {
      const row = scenarioRows.find((r) => r.design === design);
      const value = row ? Number(row[metric.key]) : 0;
      const h = (value / 100) * (height - 30);
      const x = 30 + i * (barW + 8);
      svg.appendChild(svgEl("rect", {
        x, y: height - 20 - h, width: barW, height: Math.max(h, 0.5),
        fill: PALETTE[i % PALETTE.length],
      }));
      const label = svgEl("text", {
        x: x + barW / 2, y: height - 24 - h, "text-anchor": "middle",
        "font-size": 10,
      });
      label.textContent = value.toFixed(1);
      svg.appendChild(label);
      const name = svgEl("text", {
        x: x + barW / 2, y: height - 6, "text-anchor": "middle", "font-size": 9,
      });
      name.textContent = design;
      svg.appendChild(name);
    });
    panel.appendChild(svg);
    panel.appendChild(caption);
    wrap.appendChild(panel);
  }
  return wrap;
}

export interface StepSeries {
  n: number[];
  values: number[];
  color: string;
  dashed?: boolean;
  label: string;
}

export function stepLines(series: StepSeries[], title: string, target: number): HTMLElement {
  const width = 360;
  const height = 180;
  const panel = document.createElement("figure");
  const svg = svgEl("svg", { width, height, viewBox: `0 0 ${width} ${height}` });
  const maxN = Math.max(...series.flatMap((s) => s.n));
  const sx = (n: number) => 30 + (n / maxN) * (width - 45);
  const sy = (v: number) => height - 20 - v * (height - 35);

  const targetLine = svgEl("line", {
    x1: 30, y1: sy(target), x2: width - 10, y2: sy(target),
    stroke: "#9ca3af", "stroke-width": 1, "stroke-dasharray": "2,3",
  });
  svg.appendChild(targetLine);

  for (const s of series) {
    const points = s.n.map((n, i) => `${sx(n)},${sy(s.values[i])}`).join(" ");
    const line = svgEl("polyline", {
      points, fill: "none", stroke: s.color, "stroke-width": 2,
    });
    if (s.dashed) line.setAttribute("stroke-dasharray", "5,4");
    svg.appendChild(line);
  }
  const axis = svgEl("line", {
    x1: 30, y1: height - 20, x2: width - 10, y2: height - 20,
    stroke: "#111", "stroke-width": 1,
  });
  svg.appendChild(axis);
  const caption = document.createElement("figcaption");
  caption.textContent = `${title} (${series.map((s) => s.label).join(" vs ")})`;
  panel.appendChild(svg);
  panel.appendChild(caption);
  return panel;
}
