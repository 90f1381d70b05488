/**
 * Cross-encoder scoring model: token + position embeddings, a stack of
 * self-attention blocks, and an MLP head over the leading-position vector
 * that projects to a single relevance score.
 *
 * Weights live in tf.Variables so gradients come from tf.variableGrads;
 * initialization is seeded, so identical configs build identical models.
 */

import * as tf from '@tensorflow/tfjs';

import { PAD_ID } from './tokenizer.js';

export interface EncoderConfig {
  vocabSize: number;
  hiddenSize: number;
  numHeads: number;
  numLayers: number;
  ffnSize: number;
  maxSeqLen: number;
  seed: number;
}

/** Paper-scale defaults; tests shrink everything. */
export const DEFAULT_ENCODER: Omit<EncoderConfig, 'vocabSize'> = {
  hiddenSize: 768,
  numHeads: 12,
  numLayers: 2,
  ffnSize: 3072,
  maxSeqLen: 256,
  seed: 42,
};

/** Deterministic PRNG (mulberry32) feeding a Box-Muller gaussian. */
function gaussianSource(seed: number): () => number {
  let state = seed >>> 0;
  const next = () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
  return () => {
    const u = Math.max(next(), 1e-12);
    const v = next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  };
}

export type WeightSnapshot = Record<string, { shape: number[]; values: number[] }>;

// tf registers variables globally by name; a per-instance prefix keeps
// independently constructed encoders from colliding
let instanceCounter = 0;

export class CrossEncoder {
  readonly config: EncoderConfig;
  private readonly vars = new Map<string, tf.Variable>();
  private readonly prefix: string;

  constructor(config: EncoderConfig) {
    if (config.hiddenSize % config.numHeads !== 0) {
      throw new RangeError('hiddenSize must be divisible by numHeads');
    }
    this.config = config;
    this.prefix = `enc${instanceCounter++}/`;
    const gauss = gaussianSource(config.seed);
    const init = (name: string, shape: number[], scale = 0.02) => {
      const size = shape.reduce((a, b) => a * b, 1);
      const data = new Float32Array(size);
      for (let i = 0; i < size; i++) data[i] = gauss() * scale;
      this.vars.set(name, tf.variable(tf.tensor(data, shape), true, this.prefix + name));
    };
    const zeros = (name: string, shape: number[]) =>
      this.vars.set(name, tf.variable(tf.zeros(shape), true, this.prefix + name));
    const ones = (name: string, shape: number[]) =>
      this.vars.set(name, tf.variable(tf.ones(shape), true, this.prefix + name));

    const h = config.hiddenSize;
    init('embed', [config.vocabSize, h]);
    init('pos', [config.maxSeqLen, h]);
    for (let l = 0; l < config.numLayers; l++) {
      for (const { name } of [{ name: 'q' }, { name: 'k' }, { name: 'v' }, { name: 'o' }]) {
        init(`L${l}.${name}w`, [h, h]);
        zeros(`L${l}.${name}b`, [h]);
      }
      ones(`L${l}.ln1g`, [h]);
      zeros(`L${l}.ln1b`, [h]);
      init(`L${l}.f1w`, [h, config.ffnSize]);
      zeros(`L${l}.f1b`, [config.ffnSize]);
      init(`L${l}.f2w`, [config.ffnSize, h]);
      zeros(`L${l}.f2b`, [h]);
      ones(`L${l}.ln2g`, [h]);
      zeros(`L${l}.ln2b`, [h]);
    }
    init('headw', [h, h]);
    zeros('headb', [h]);
    init('outw', [h, 1]);
    zeros('outb', [1]);
  }

  private v(name: string): tf.Variable {
    const found = this.vars.get(name);
    if (!found) throw new Error(`unknown variable ${name}`);
    return found;
  }

  trainableVariables(): tf.Variable[] {
    return [...this.vars.values()];
  }

  private layerNorm(x: tf.Tensor, gamma: tf.Tensor, beta: tf.Tensor): tf.Tensor {
    const mean = x.mean(-1, true);
    const centered = x.sub(mean);
    const variance = centered.square().mean(-1, true);
    return centered.div(variance.add(1e-5).sqrt()).mul(gamma).add(beta);
  }

  private gelu(x: tf.Tensor): tf.Tensor {
    // tanh approximation
    const inner = x.add(x.pow(3).mul(0.044715)).mul(Math.sqrt(2 / Math.PI));
    return x.mul(inner.tanh().add(1)).mul(0.5);
  }

  /**
   * Scores for a batch of token-id sequences (padded internally).
   * Returns a rank-1 tensor of length batch.
   */
  score(batch: number[][]): tf.Tensor {
    const cfg = this.config;
    const b = batch.length;
    const len = Math.min(
      cfg.maxSeqLen,
      batch.reduce((m, ids) => Math.max(m, ids.length), 1),
    );
    const idData = new Int32Array(b * len).fill(PAD_ID);
    const maskData = new Float32Array(b * len);
    batch.forEach((ids, row) => {
      const n = Math.min(ids.length, len);
      for (let i = 0; i < n; i++) {
        idData[row * len + i] = ids[i];
        maskData[row * len + i] = 1;
      }
    });

    const ids = tf.tensor2d(idData, [b, len], 'int32');
    const mask = tf.tensor2d(maskData, [b, len]);
    // additive key mask: 0 on real tokens, -1e9 on padding
    const keyBias = mask.sub(1).mul(1e9).reshape([b, 1, 1, len]);

    const headDim = cfg.hiddenSize / cfg.numHeads;
    // rank-3 x rank-2 matMul gradients do not reduce broadcast dims in
    // tfjs, so dense layers run on a flattened [b*len, features] view
    const dense = (input: tf.Tensor, w: tf.Tensor, bias: tf.Tensor) => {
      const [inDim, outDim] = w.shape as [number, number];
      return input.reshape([b * len, inDim]).matMul(w).add(bias).reshape([b, len, outDim]);
    };
    let x = tf.gather(this.v('embed'), ids).add(
      this.v('pos').slice([0, 0], [len, cfg.hiddenSize]).expandDims(0),
    );

    for (let l = 0; l < cfg.numLayers; l++) {
      const proj = (tag: string) =>
        dense(x, this.v(`L${l}.${tag}w`), this.v(`L${l}.${tag}b`))
          .reshape([b, len, cfg.numHeads, headDim])
          .transpose([0, 2, 1, 3]);
      const q = proj('q');
      const k = proj('k');
      const vv = proj('v');
      const logits = q.matMul(k, false, true).div(Math.sqrt(headDim)).add(keyBias);
      const ctx = tf
        .softmax(logits, -1)
        .matMul(vv)
        .transpose([0, 2, 1, 3])
        .reshape([b, len, cfg.hiddenSize]);
      const attnOut = dense(ctx, this.v(`L${l}.ow`), this.v(`L${l}.ob`));
      x = this.layerNorm(x.add(attnOut), this.v(`L${l}.ln1g`), this.v(`L${l}.ln1b`));
      const ffn = dense(
        this.gelu(dense(x, this.v(`L${l}.f1w`), this.v(`L${l}.f1b`))),
        this.v(`L${l}.f2w`),
        this.v(`L${l}.f2b`),
      );
      x = this.layerNorm(x.add(ffn), this.v(`L${l}.ln2g`), this.v(`L${l}.ln2b`));
    }

    const cls = x.slice([0, 0, 0], [b, 1, cfg.hiddenSize]).reshape([b, cfg.hiddenSize]);
    const head = cls.matMul(this.v('headw')).add(this.v('headb')).tanh();
    return head.matMul(this.v('outw')).add(this.v('outb')).reshape([b]);
  }

  /** Plain-number scores with no gradient bookkeeping. */
  scoreSync(batch: number[][]): number[] {
    return tf.tidy(() => Array.from(this.score(batch).dataSync()));
  }

  getWeights(): WeightSnapshot {
    const snapshot: WeightSnapshot = {};
    for (const [name, variable] of this.vars) {
      snapshot[name] = {
        shape: variable.shape.slice(),
        values: Array.from(variable.dataSync()),
      };
    }
    return snapshot;
  }

  setWeights(snapshot: WeightSnapshot): void {
    for (const [name, variable] of this.vars) {
      const entry = snapshot[name];
      if (!entry) throw new Error(`snapshot missing variable ${name}`);
      variable.assign(tf.tensor(entry.values, entry.shape as number[]));
    }
  }

  /** Release the weights and unregister them from the tf engine. */
  dispose(): void {
    for (const variable of this.vars.values()) variable.dispose();
    this.vars.clear();
  }
}
