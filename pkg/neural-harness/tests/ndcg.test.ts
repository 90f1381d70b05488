import { describe, expect, it } from 'vitest';

import { meanNdcgAtK, ndcgAtK } from '../src/ndcg.js';

describe('ndcgAtK', () => {
  it('matches the hand-computed [0,1,2] case', () => {
    expect(ndcgAtK([0, 1, 2], 3)).toBeCloseTo(0.58688267143572, 10);
  });

  it('is 1 for ideal orderings', () => {
    expect(ndcgAtK([3, 2, 1, 0], 10)).toBeCloseTo(1, 12);
    expect(ndcgAtK([1, 0, 0], 3)).toBeCloseTo(1, 12);
  });

  it('is 0 when every label is 0', () => {
    expect(ndcgAtK([0, 0, 0], 3)).toBe(0);
  });

  it('stays within [0, 1]', () => {
    expect(ndcgAtK([0, 0, 1], 2)).toBe(0);
    expect(ndcgAtK([1, 2, 3], 2)).toBeGreaterThan(0);
    expect(ndcgAtK([1, 2, 3], 2)).toBeLessThanOrEqual(1);
  });

  it('rejects k < 1', () => {
    expect(() => ndcgAtK([1], 0)).toThrow(RangeError);
  });
});

describe('meanNdcgAtK', () => {
  it('averages groups and skips zero-ideal ones', () => {
    const groups = [
      { scores: [3, 2, 1], labels: [1, 0, 0] }, // perfect -> 1
      { scores: [1, 2, 3], labels: [0, 0, 0] }, // zero-ideal -> skipped
    ];
    expect(meanNdcgAtK(groups, 3)).toBeCloseTo(1, 12);
  });

  it('breaks score ties by input order', () => {
    const groups = [{ scores: [1, 1], labels: [1, 0] }];
    expect(meanNdcgAtK(groups, 3)).toBeCloseTo(1, 12);
  });

  it('is 0 with no scorable groups', () => {
    expect(meanNdcgAtK([], 3)).toBe(0);
  });
});
