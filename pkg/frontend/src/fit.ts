/**
 * Exponential decay rate estimation for ensemble risk series.
 *
 * A relaxing SDE ensemble has mean risk r(t) = plateau + A * exp(slope * t)
 * with slope < 0. Linearized as ln(r - plateau) = ln(A) + slope * t, the
 * slope comes from a least-squares line over the pre-plateau window: the
 * points whose excess is still at least window_frac of the initial excess.
 * This mirrors the estimator the simulation side uses, so the annotated
 * slope agrees with the reported relaxation rate (up to sign).
 */

export interface DecayFit {
  /** Slope of ln(excess) against t; negative for a decaying series. */
  slope: number;
  /** Intercept ln(A) of the same line. */
  intercept: number;
  /** Coefficient of determination in log space over the fit window. */
  r2: number;
  /** Plateau that was subtracted before taking logs. */
  plateau: number;
  /** Points that entered the fit, in input order. */
  window: { t: number[]; excess: number[] };
}

/**
 * Fit ln(risk - plateau) = intercept + slope * t by least squares.
 *
 * plateau defaults to the mean of the last 10% of the series (at least one
 * point). Points with excess below windowFrac of the initial excess are
 * dropped; at least 10 must survive. Throws when the series starts at or
 * below the plateau, or when the usable window is too short.
 */
export function fitLogExcessDecay(
  t: number[],
  risk: number[],
  windowFrac = 0.05,
  plateau?: number
): DecayFit {
  if (t.length !== risk.length) {
    throw new Error(`t and risk lengths differ (${t.length} vs ${risk.length})`);
  }
  const n = risk.length;
  let level = plateau;
  if (level === undefined) {
    const tail = Math.max(1, Math.floor(0.1 * n));
    let sum = 0;
    for (let i = n - tail; i < n; i++) sum += risk[i];
    level = sum / tail;
  }
  const excess = risk.map((r) => r - level);
  if (excess[0] <= 0) {
    throw new Error("non-positive initial excess; nothing to fit");
  }
  const cut = windowFrac * excess[0];
  const keepT: number[] = [];
  const keepE: number[] = [];
  for (let i = 0; i < n; i++) {
    if (excess[i] >= cut) {
      keepT.push(t[i]);
      keepE.push(excess[i]);
    }
  }
  if (keepT.length < 10) {
    throw new Error("pre-plateau window too short (< 10 points)");
  }
  const y = keepE.map(Math.log);
  const { slope, intercept } = leastSquaresLine(keepT, y);
  let ssRes = 0;
  let ssTot = 0;
  const yMean = mean(y);
  for (let i = 0; i < y.length; i++) {
    const pred = slope * keepT[i] + intercept;
    ssRes += (y[i] - pred) ** 2;
    ssTot += (y[i] - yMean) ** 2;
  }
  const r2 = ssTot > 0 ? 1 - ssRes / ssTot : 1;
  return { slope, intercept, r2, plateau: level, window: { t: keepT, excess: keepE } };
}

function mean(xs: number[]): number {
  let s = 0;
  for (const x of xs) s += x;
  return s / xs.length;
}

/** Ordinary least squares y = slope * x + intercept. Needs 2+ points. */
export function leastSquaresLine(
  x: number[],
  y: number[]
): { slope: number; intercept: number } {
  const n = x.length;
  if (n < 2) {
    throw new Error("need at least 2 points for a line fit");
  }
  const xm = mean(x);
  const ym = mean(y);
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (x[i] - xm) ** 2;
    sxy += (x[i] - xm) * (y[i] - ym);
  }
  if (sxx === 0) {
    throw new Error("degenerate x values; slope undefined");
  }
  const slope = sxy / sxx;
  return { slope, intercept: ym - slope * xm };
}
