export { lceLoss, lceGradient } from './lce.js';
export { ndcgAtK, meanNdcgAtK } from './ndcg.js';
export { parseSessionLog, parseCorpusTsv, turnKey } from './sessionLog.js';
export type { Session, QueryTurn, Impression } from './sessionLog.js';
export {
  buildAdhocGroups,
  buildSessionGroups,
  buildScoringGroups,
  parseAsqTsv,
  groupLabels,
} from './groups.js';
export type { TrainingGroup, ScoringGroup, GroupBuildStats } from './groups.js';
export { CharTokenizer, PAD_ID, UNK_ID, CLS_ID, SEP_ID } from './tokenizer.js';
export { CrossEncoder, DEFAULT_ENCODER } from './encoder.js';
export type { EncoderConfig, WeightSnapshot } from './encoder.js';
export {
  finetune,
  evaluateGroups,
  selectBest,
  linearWarmupLr,
  DEFAULT_FINETUNE,
} from './train.js';
export type { FinetuneConfig, FinetuneResult, Checkpoint, TrainLogEntry } from './train.js';
export { scoreGroups, formatScoreTsv, parseScoreTsv, clampScore } from './exportScores.js';
export { ParseError, MissingAsqRowError, NoHeldOutGroupsError } from './errors.js';
