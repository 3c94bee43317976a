/**
 * The three figure kinds rendered from villani-net CSV artifacts.
 *
 * lambda_sweep   sweep.csv (train command): one test-accuracy-vs-lambda
 *                line per hidden width, with the critical regularization
 *                strength lambda_c = 0.03125 marked as a vertical rule.
 * training_curve trajectory CSV (mnist command, Trajectory.to_csv): risk
 *                against SGD step.
 * rate_fit       sde_series.csv (sde command): ensemble mean risk minus its
 *                plateau on a log axis, with the least-squares decay line
 *                and its slope annotated.
 */

import { scaleLinear, scaleLog } from "d3-scale";
import type { NumericRow } from "./csv.js";
import { fitLogExcessDecay } from "./fit.js";
import {
  PLOT,
  PALETTE,
  axisBottom,
  axisLeft,
  circle,
  decadeTicks,
  lineEl,
  linearTicks,
  polyline,
  svgDocument,
  textEl,
  type Scale,
} from "./svg.js";

/** Critical regularization strength for the sigmoid net family. */
export const LAMBDA_C = 0.03125;

export type PlotKind = "lambda_sweep" | "training_curve" | "rate_fit";

export const PLOT_KINDS: PlotKind[] = ["lambda_sweep", "training_curve", "rate_fit"];

/** Columns each kind reads; extra columns in the artifact are ignored. */
export const REQUIRED_COLUMNS: Record<PlotKind, string[]> = {
  lambda_sweep: ["p", "lambda", "test_accuracy"],
  training_curve: ["step", "risk"],
  rate_fit: ["t", "mean_risk"],
};

export function render(kind: PlotKind, rows: NumericRow[]): string {
  switch (kind) {
    case "lambda_sweep":
      return renderLambdaSweep(rows);
    case "training_curve":
      return renderTrainingCurve(rows);
    case "rate_fit":
      return renderRateFit(rows);
  }
}

function domainOf(values: number[], extra: number[] = []): [number, number] {
  let lo = Math.min(...values, ...extra);
  let hi = Math.max(...values, ...extra);
  if (lo === hi) {
    lo -= 0.01;
    hi += 0.01;
  }
  return [lo, hi];
}

function renderLambdaSweep(rows: NumericRow[]): string {
  const widths = [...new Set(rows.map((r) => r.p))].sort((a, b) => a - b);
  const lambdas = rows.map((r) => r.lambda);
  // the rule must always be visible, so the domain includes lambda_c
  const x = scaleLinear()
    .domain(domainOf(lambdas, [LAMBDA_C]))
    .range([PLOT.x0, PLOT.x1])
    .nice();
  const y = scaleLinear().domain([0, 1]).range([PLOT.y1, PLOT.y0]);

  const body: string[] = [
    axisBottom(x as Scale, linearTicks(x as Scale), "lambda"),
    axisLeft(y as Scale, linearTicks(y as Scale), "test accuracy"),
  ];

  const xRule = x(LAMBDA_C);
  body.push(
    lineEl(xRule, PLOT.y0, xRule, PLOT.y1, {
      class: "lambda-c-rule",
      stroke: "#555",
      "stroke-width": 1.2,
      "stroke-dasharray": "5 3",
    })
  );
  body.push(
    textEl(xRule + 5, PLOT.y0 + 12, `lambda_c = ${LAMBDA_C}`, {
      class: "lambda-c-label",
      "font-size": 11,
      fill: "#555",
    })
  );

  widths.forEach((w, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = rows
      .filter((r) => r.p === w)
      .sort((a, b) => a.lambda - b.lambda)
      .map((r): [number, number] => [x(r.lambda), y(r.test_accuracy)]);
    body.push(
      polyline(pts, {
        class: "series",
        "data-p": String(w),
        stroke: color,
        "stroke-width": 1.8,
      })
    );
    for (const [px, py] of pts) {
      body.push(circle(px, py, 2.6, { class: "pt", fill: color }));
    }
  });

  // legend in the lower-left corner, below the accuracy curves
  widths.forEach((w, i) => {
    const color = PALETTE[i % PALETTE.length];
    const ly = PLOT.y1 - 12 - 16 * (widths.length - 1 - i);
    body.push(
      lineEl(PLOT.x0 + 10, ly, PLOT.x0 + 28, ly, {
        stroke: color,
        "stroke-width": 1.8,
      })
    );
    body.push(
      textEl(PLOT.x0 + 34, ly + 3.5, `p = ${w}`, {
        class: "legend",
        "font-size": 11,
      })
    );
  });

  return svgDocument("test accuracy vs lambda", body);
}

function renderTrainingCurve(rows: NumericRow[]): string {
  const steps = rows.map((r) => r.step);
  const risks = rows.map((r) => r.risk);
  const x = scaleLinear().domain(domainOf(steps)).range([PLOT.x0, PLOT.x1]).nice();
  const y = scaleLinear().domain(domainOf(risks)).range([PLOT.y1, PLOT.y0]).nice();

  const pts = rows
    .slice()
    .sort((a, b) => a.step - b.step)
    .map((r): [number, number] => [x(r.step), y(r.risk)]);

  const body = [
    axisBottom(x as Scale, linearTicks(x as Scale), "step"),
    axisLeft(y as Scale, linearTicks(y as Scale), "risk"),
    polyline(pts, {
      class: "series",
      stroke: PALETTE[0],
      "stroke-width": 1.8,
    }),
  ];
  return svgDocument("training risk vs step", body);
}

function renderRateFit(rows: NumericRow[]): string {
  const t = rows.map((r) => r.t);
  const risk = rows.map((r) => r.mean_risk);
  const fit = fitLogExcessDecay(t, risk);

  const pts: Array<[number, number]> = [];
  for (let i = 0; i < t.length; i++) {
    const excess = risk[i] - fit.plateau;
    if (excess > 0) {
      pts.push([t[i], excess]);
    }
  }
  const excesses = pts.map(([, e]) => e);
  const x = scaleLinear().domain(domainOf(t)).range([PLOT.x0, PLOT.x1]).nice();
  const y = scaleLog()
    .domain([Math.min(...excesses) / 1.5, Math.max(...excesses) * 1.5])
    .range([PLOT.y1, PLOT.y0]);

  const body: string[] = [
    axisBottom(x as Scale, linearTicks(x as Scale), "t"),
    axisLeft(y as Scale, decadeTicks(y as Scale), "mean risk - plateau"),
  ];

  for (const [ti, ei] of pts) {
    body.push(
      circle(x(ti), y(ei), 2, {
        class: "excess",
        fill: PALETTE[0],
        "fill-opacity": 0.8,
      })
    );
  }

  // straight in log space, so the window endpoints define the whole line
  const tA = fit.window.t[0];
  const tB = fit.window.t[fit.window.t.length - 1];
  const lineAt = (tv: number) => Math.exp(fit.intercept + fit.slope * tv);
  body.push(
    polyline(
      [
        [x(tA), y(lineAt(tA))],
        [x(tB), y(lineAt(tB))],
      ],
      {
        class: "fit",
        stroke: PALETTE[3],
        "stroke-width": 1.8,
        "stroke-dasharray": "6 3",
      }
    )
  );

  body.push(
    textEl(PLOT.x1 - 12, PLOT.y0 + 16, `slope ${fit.slope.toFixed(2)}`, {
      class: "rate-annotation",
      "text-anchor": "end",
      "font-size": 12,
    })
  );
  body.push(
    textEl(PLOT.x1 - 12, PLOT.y0 + 32, `r^2 ${fit.r2.toFixed(3)}`, {
      class: "fit-quality",
      "text-anchor": "end",
      "font-size": 11,
      fill: "#555",
    })
  );
  body.push(
    textEl(PLOT.x1 - 12, PLOT.y0 + 48, `plateau ${fit.plateau.toFixed(4)}`, {
      class: "fit-plateau",
      "text-anchor": "end",
      "font-size": 11,
      fill: "#555",
    })
  );

  return svgDocument("ensemble excess risk decay", body);
}
