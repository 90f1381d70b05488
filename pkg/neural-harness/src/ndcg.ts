/**
 * NDCG@k with gain 2^label - 1 and discount 1/log2(1 + rank), the same
 * convention the ranking pipeline trains and reports with.
 */

function dcg(labels: number[], k: number): number {
  let total = 0;
  const n = Math.min(k, labels.length);
  for (let i = 0; i < n; i++) {
    total += (Math.pow(2, labels[i]) - 1) / Math.log2(i + 2);
  }
  return total;
}

/** NDCG of labels in ranked order; 0 when the ideal DCG is zero. */
export function ndcgAtK(labelsInRankedOrder: number[], k: number): number {
  if (k < 1) throw new RangeError('k must be >= 1');
  const ideal = dcg([...labelsInRankedOrder].sort((a, b) => b - a), k);
  if (ideal <= 0) return 0;
  return dcg(labelsInRankedOrder, k) / ideal;
}

/**
 * Mean NDCG@k of score/label groups; ranking sorts scores descending with
 * ties kept in input order. Groups whose ideal DCG is zero are skipped.
 */
export function meanNdcgAtK(
  groups: Array<{ scores: number[]; labels: number[] }>,
  k: number,
): number {
  const values: number[] = [];
  for (const group of groups) {
    if (!group.labels.some((l) => l > 0)) continue;
    const order = group.scores
      .map((score, i) => ({ score, i }))
      .sort((a, b) => b.score - a.score || a.i - b.i);
    values.push(ndcgAtK(order.map(({ i }) => group.labels[i]), k));
  }
  if (values.length === 0) return 0;
  return values.reduce((a, b) => a + b, 0) / values.length;
}
