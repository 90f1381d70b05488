/**
 * Command-line entry: `finetune` trains a reranker on a session log and
 * writes a checkpoint + JSONL training log; `export` scores every SERP of a
 * session log with a checkpoint and writes the external-score TSV consumed
 * by the ranking pipeline.
 */

import * as fs from 'node:fs';
import { parseArgs } from 'node:util';

import { CrossEncoder, EncoderConfig, WeightSnapshot } from './encoder.js';
import { formatScoreTsv, scoreGroups } from './exportScores.js';
import {
  buildAdhocGroups,
  buildScoringGroups,
  buildSessionGroups,
  parseAsqTsv,
  TrainingGroup,
} from './groups.js';
import { parseCorpusTsv, parseSessionLog } from './sessionLog.js';
import { CharTokenizer } from './tokenizer.js';
import { DEFAULT_FINETUNE, finetune, FinetuneConfig } from './train.js';

interface CheckpointFile {
  version: 1;
  step: number;
  metric: number;
  maxSeqLen: number;
  encoder: EncoderConfig;
  tokenizer: { chars: string[] };
  weights: WeightSnapshot;
}

function fail(message: string): never {
  process.stderr.write(`error: ${message}\n`);
  process.exit(1);
}

function readText(path: string): string {
  return fs.readFileSync(path, 'utf-8');
}

function loadGroups(values: Record<string, string | undefined>): {
  trainGroups: TrainingGroup[];
  sessions: ReturnType<typeof parseSessionLog>;
  corpus: Map<string, string>;
  asq?: Map<string, string>;
} {
  const sessions = parseSessionLog(readText(values.sessions!));
  const corpus = parseCorpusTsv(readText(values.corpus!));
  const mode = values.mode ?? 'adhoc';
  if (mode === 'session') {
    if (!values.asq) fail('--mode session needs --asq <tsv from the ranking pipeline>');
    const asq = parseAsqTsv(readText(values.asq));
    return { trainGroups: buildSessionGroups(sessions, corpus, asq), sessions, corpus, asq };
  }
  if (mode !== 'adhoc') fail(`unknown --mode ${mode}`);
  return { trainGroups: buildAdhocGroups(sessions, corpus), sessions, corpus };
}

function cmdFinetune(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      sessions: { type: 'string' },
      corpus: { type: 'string' },
      asq: { type: 'string' },
      mode: { type: 'string' },
      out: { type: 'string' },
      log: { type: 'string' },
      'heldout-fraction': { type: 'string' },
      steps: { type: 'string' },
      lr: { type: 'string' },
      'warmup-ratio': { type: 'string' },
      'batch-size': { type: 'string' },
      'max-seq-len': { type: 'string' },
      'checkpoint-every': { type: 'string' },
      hidden: { type: 'string' },
      heads: { type: 'string' },
      layers: { type: 'string' },
      ffn: { type: 'string' },
      seed: { type: 'string' },
    },
  });
  if (!values.sessions || !values.corpus || !values.out) {
    fail('finetune needs --sessions, --corpus, --out');
  }
  const { trainGroups } = loadGroups(values);
  if (trainGroups.length === 0) fail('no training groups (no clicked turns?)');

  const fraction = Number(values['heldout-fraction'] ?? '0.2');
  const heldOutCount = Math.max(1, Math.round(trainGroups.length * fraction));
  const heldOut = trainGroups.slice(-heldOutCount);
  const train = trainGroups.slice(0, -heldOutCount);
  const trainSet = train.length > 0 ? train : heldOut;

  const config: FinetuneConfig = {
    ...DEFAULT_FINETUNE,
    learningRate: Number(values.lr ?? DEFAULT_FINETUNE.learningRate),
    warmupRatio: Number(values['warmup-ratio'] ?? DEFAULT_FINETUNE.warmupRatio),
    batchSize: Number(values['batch-size'] ?? DEFAULT_FINETUNE.batchSize),
    maxSeqLen: Number(values['max-seq-len'] ?? DEFAULT_FINETUNE.maxSeqLen),
    checkpointEvery: Number(values['checkpoint-every'] ?? DEFAULT_FINETUNE.checkpointEvery),
    totalSteps: Number(values.steps ?? DEFAULT_FINETUNE.totalSteps),
    encoder: {
      hiddenSize: Number(values.hidden ?? DEFAULT_FINETUNE.encoder.hiddenSize),
      numHeads: Number(values.heads ?? DEFAULT_FINETUNE.encoder.numHeads),
      numLayers: Number(values.layers ?? DEFAULT_FINETUNE.encoder.numLayers),
      ffnSize: Number(values.ffn ?? DEFAULT_FINETUNE.encoder.ffnSize),
      maxSeqLen: Number(values['max-seq-len'] ?? DEFAULT_FINETUNE.maxSeqLen),
      seed: Number(values.seed ?? DEFAULT_FINETUNE.encoder.seed),
    },
  };

  const tokenizer = CharTokenizer.build([
    ...trainGroups.map((g) => g.queryText),
    ...trainGroups.flatMap((g) => [g.positiveDoc, ...g.negatives]),
  ]);
  const result = finetune(trainSet, heldOut, tokenizer, config);

  const checkpoint: CheckpointFile = {
    version: 1,
    step: result.best.step,
    metric: result.best.metric,
    maxSeqLen: config.maxSeqLen,
    encoder: { ...config.encoder, vocabSize: tokenizer.vocabSize },
    tokenizer: tokenizer.toJSON(),
    weights: result.best.weights,
  };
  fs.writeFileSync(values.out, JSON.stringify(checkpoint));
  if (values.log) {
    fs.writeFileSync(values.log, result.log.map((e) => JSON.stringify(e)).join('\n') + '\n');
  }
  process.stdout.write(
    `best checkpoint: step ${result.best.step} ndcg@3 ${result.best.metric.toFixed(4)} ` +
      `(${trainSet.length} train groups, ${heldOut.length} held out)\n`,
  );
}

function cmdExport(argv: string[]): void {
  const { values } = parseArgs({
    args: argv,
    options: {
      checkpoint: { type: 'string' },
      sessions: { type: 'string' },
      corpus: { type: 'string' },
      asq: { type: 'string' },
      mode: { type: 'string' },
      out: { type: 'string' },
    },
  });
  if (!values.checkpoint || !values.sessions || !values.corpus || !values.out) {
    fail('export needs --checkpoint, --sessions, --corpus, --out');
  }
  const checkpoint = JSON.parse(readText(values.checkpoint)) as CheckpointFile;
  if (checkpoint.version !== 1) fail(`unsupported checkpoint version ${checkpoint.version}`);
  const tokenizer = CharTokenizer.fromJSON(checkpoint.tokenizer);
  const encoder = new CrossEncoder(checkpoint.encoder);
  encoder.setWeights(checkpoint.weights);

  const sessions = parseSessionLog(readText(values.sessions));
  const corpus = parseCorpusTsv(readText(values.corpus));
  const asq =
    (values.mode ?? 'adhoc') === 'session'
      ? parseAsqTsv(readText(values.asq ?? fail('--mode session needs --asq')))
      : undefined;
  const groups = buildScoringGroups(sessions, corpus, asq);
  const rows = scoreGroups(encoder, tokenizer, groups, checkpoint.maxSeqLen);
  fs.writeFileSync(values.out, formatScoreTsv(rows));
  process.stdout.write(`wrote ${rows.length} scores for ${groups.length} groups\n`);
}

export function main(argv: string[]): void {
  const [command, ...rest] = argv;
  if (command === 'finetune') return cmdFinetune(rest);
  if (command === 'export') return cmdExport(rest);
  fail(`usage: neural-harness <finetune|export> [options]; got '${command ?? ''}'`);
}

const isDirectRun =
  process.argv[1] !== undefined &&
  (process.argv[1].endsWith('cli.ts') || process.argv[1].endsWith('cli.js'));
if (isDirectRun) {
  main(process.argv.slice(2));
}
