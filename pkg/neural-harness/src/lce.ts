/**
 * Localized contrastive loss over one SERP: softmax cross-entropy with a
 * single positive (the clicked document) against the same-page negatives.
 *
 * Loss = -log( exp(s+) / sum_d exp(s_d) ), computed with max-subtraction
 * so large scores cannot overflow.
 */

/** Stable -log softmax probability of the positive candidate. */
export function lceLoss(scores: number[], positiveIndex: number): number {
  if (scores.length === 0) {
    throw new RangeError('lceLoss needs at least one score');
  }
  if (positiveIndex < 0 || positiveIndex >= scores.length) {
    throw new RangeError(
      `positive index ${positiveIndex} out of range for ${scores.length} scores`,
    );
  }
  let max = -Infinity;
  for (const s of scores) {
    if (s > max) max = s;
  }
  let sum = 0;
  for (const s of scores) {
    sum += Math.exp(s - max);
  }
  return max + Math.log(sum) - scores[positiveIndex];
}

/** Analytic gradient of lceLoss w.r.t. the scores: softmax minus one-hot. */
export function lceGradient(scores: number[], positiveIndex: number): number[] {
  if (positiveIndex < 0 || positiveIndex >= scores.length) {
    throw new RangeError(
      `positive index ${positiveIndex} out of range for ${scores.length} scores`,
    );
  }
  let max = -Infinity;
  for (const s of scores) {
    if (s > max) max = s;
  }
  let sum = 0;
  const exps = scores.map((s) => {
    const e = Math.exp(s - max);
    sum += e;
    return e;
  });
  return exps.map((e, i) => e / sum - (i === positiveIndex ? 1 : 0));
}
