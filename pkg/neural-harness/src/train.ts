/**
 * Fine-tuning loop: Adam with linear warmup over the contrastive per-SERP
 * loss, periodic checkpointing, and selection of the checkpoint with the
 * highest held-out NDCG@3.
 */

import * as tf from '@tensorflow/tfjs';

import { CrossEncoder, DEFAULT_ENCODER, EncoderConfig, WeightSnapshot } from './encoder.js';
import { NoHeldOutGroupsError } from './errors.js';
import { groupLabels, TrainingGroup } from './groups.js';
import { meanNdcgAtK } from './ndcg.js';
import { CharTokenizer } from './tokenizer.js';

export interface FinetuneConfig {
  learningRate: number;
  warmupRatio: number;
  /** Groups whose losses are averaged per optimizer step. */
  batchSize: number;
  maxSeqLen: number;
  checkpointEvery: number;
  totalSteps: number;
  /** NDCG cutoff of the checkpoint-selection metric. */
  selectionK: number;
  encoder: Omit<EncoderConfig, 'vocabSize'>;
}

export const DEFAULT_FINETUNE: FinetuneConfig = {
  learningRate: 1e-5,
  warmupRatio: 0.1,
  batchSize: 32,
  maxSeqLen: 256,
  checkpointEvery: 1000,
  totalSteps: 10000,
  selectionK: 3,
  encoder: DEFAULT_ENCODER,
};

export interface TrainLogEntry {
  step: number;
  loss: number;
  metric?: number;
}

export interface Checkpoint {
  step: number;
  metric: number;
  weights: WeightSnapshot;
}

export interface FinetuneResult {
  encoder: CrossEncoder;
  best: Checkpoint;
  log: TrainLogEntry[];
}

/** Adam with explicit state so the learning rate can change per step. */
class Adam {
  private readonly m = new Map<string, tf.Tensor>();
  private readonly v = new Map<string, tf.Tensor>();
  private t = 0;

  constructor(
    private readonly beta1 = 0.9,
    private readonly beta2 = 0.999,
    private readonly eps = 1e-8,
  ) {}

  step(grads: tf.NamedTensorMap, variables: tf.Variable[], lr: number): void {
    this.t += 1;
    const correction1 = 1 - Math.pow(this.beta1, this.t);
    const correction2 = 1 - Math.pow(this.beta2, this.t);
    for (const variable of variables) {
      const g = grads[variable.name];
      if (!g) continue;
      const mPrev = this.m.get(variable.name) ?? tf.zerosLike(g);
      const vPrev = this.v.get(variable.name) ?? tf.zerosLike(g);
      const mNext = tf.tidy(() => mPrev.mul(this.beta1).add(g.mul(1 - this.beta1)));
      const vNext = tf.tidy(() => vPrev.mul(this.beta2).add(g.square().mul(1 - this.beta2)));
      tf.tidy(() => {
        const update = mNext
          .div(correction1)
          .div(vNext.div(correction2).sqrt().add(this.eps))
          .mul(lr);
        variable.assign(variable.sub(update));
      });
      mPrev.dispose();
      vPrev.dispose();
      this.m.set(variable.name, mNext);
      this.v.set(variable.name, vNext);
    }
  }

  dispose(): void {
    for (const t of this.m.values()) t.dispose();
    for (const t of this.v.values()) t.dispose();
    this.m.clear();
    this.v.clear();
  }
}

/** Contrastive loss of one group as a tf scalar (positive sits at index 0). */
function groupLossTensor(
  encoder: CrossEncoder,
  tokenizer: CharTokenizer,
  group: TrainingGroup,
  maxSeqLen: number,
): tf.Tensor {
  const inputs = [group.positiveDoc, ...group.negatives].map((doc) =>
    tokenizer.encodeInput(group.queryText, doc, maxSeqLen),
  );
  const scores = encoder.score(inputs);
  return tf.logSumExp(scores).sub(scores.slice([0], [1]).reshape([]));
}

/** Held-out mean NDCG (click labels: the positive is the only relevant doc). */
export function evaluateGroups(
  encoder: CrossEncoder,
  tokenizer: CharTokenizer,
  groups: TrainingGroup[],
  maxSeqLen: number,
  k: number,
): number {
  const scored = groups.map((group) => {
    const inputs = [group.positiveDoc, ...group.negatives].map((doc) =>
      tokenizer.encodeInput(group.queryText, doc, maxSeqLen),
    );
    return { scores: encoder.scoreSync(inputs), labels: groupLabels(group) };
  });
  return meanNdcgAtK(scored, k);
}

/** Index of the best checkpoint metric (ties go to the earliest). */
export function selectBest(metrics: number[]): number {
  let best = 0;
  for (let i = 1; i < metrics.length; i++) {
    if (metrics[i] > metrics[best]) best = i;
  }
  return best;
}

export function linearWarmupLr(step: number, config: FinetuneConfig): number {
  const warmupSteps = Math.max(1, Math.round(config.warmupRatio * config.totalSteps));
  return step <= warmupSteps
    ? (config.learningRate * step) / warmupSteps
    : config.learningRate;
}

export function finetune(
  trainGroups: TrainingGroup[],
  heldOutGroups: TrainingGroup[],
  tokenizer: CharTokenizer,
  config: FinetuneConfig = DEFAULT_FINETUNE,
): FinetuneResult {
  if (trainGroups.length === 0) throw new RangeError('no training groups');
  if (heldOutGroups.length === 0) throw new NoHeldOutGroupsError();

  const encoder = new CrossEncoder({ ...config.encoder, vocabSize: tokenizer.vocabSize });
  const variables = encoder.trainableVariables();
  const adam = new Adam();
  const log: TrainLogEntry[] = [];
  const checkpoints: Checkpoint[] = [];
  let cursor = 0;

  const evaluate = (step: number, loss: number) => {
    const metric = evaluateGroups(
      encoder, tokenizer, heldOutGroups, config.maxSeqLen, config.selectionK);
    checkpoints.push({ step, metric, weights: encoder.getWeights() });
    log.push({ step, loss, metric });
  };

  for (let step = 1; step <= config.totalSteps; step++) {
    const batch: TrainingGroup[] = [];
    for (let i = 0; i < Math.min(config.batchSize, trainGroups.length); i++) {
      batch.push(trainGroups[cursor]);
      cursor = (cursor + 1) % trainGroups.length;
    }
    const { value, grads } = tf.variableGrads(
      () =>
        tf.tidy(() => {
          const losses = batch.map((group) =>
            groupLossTensor(encoder, tokenizer, group, config.maxSeqLen),
          );
          return tf.stack(losses).mean() as tf.Scalar;
        }),
      variables,
    );
    const loss = value.dataSync()[0];
    value.dispose();
    adam.step(grads, variables, linearWarmupLr(step, config));
    for (const g of Object.values(grads)) g.dispose();

    if (step % config.checkpointEvery === 0) {
      evaluate(step, loss);
    } else {
      log.push({ step, loss });
    }
    if (step === config.totalSteps && step % config.checkpointEvery !== 0) {
      evaluate(step, loss);
    }
  }
  adam.dispose();

  const bestIndex = selectBest(checkpoints.map((c) => c.metric));
  const best = checkpoints[bestIndex];
  encoder.setWeights(best.weights);
  return { encoder, best, log };
}
