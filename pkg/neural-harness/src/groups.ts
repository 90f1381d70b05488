/**
 * Training-group construction from click logs.
 *
 * Each group holds one clicked (positive) document and the non-clicked
 * impressions of the same result page as negatives. Turns without clicks
 * contribute nothing; turns with several clicks yield one group per click,
 * all sharing the non-clicked negatives.
 */

import { MissingAsqRowError, ParseError } from './errors.js';
import { Session, turnKey } from './sessionLog.js';

export interface TrainingGroup {
  groupKey: string;
  /** Raw query text (ad-hoc mode) or the assembled session query. */
  queryText: string;
  positiveDoc: string;
  negatives: string[];
  /** Candidate doc ids aligned as [positive, ...negatives]. */
  docIds: string[];
}

/** A whole SERP to score for export: every impression, no labels. */
export interface ScoringGroup {
  groupKey: string;
  queryText: string;
  docIds: string[];
  docs: string[];
}

export interface GroupBuildStats {
  turnsWithoutClicks: number;
  missingDocs: number;
}

function resolveDocs(
  impressions: Array<{ docId: string }>,
  corpus: Map<string, string>,
  stats: GroupBuildStats,
): Map<string, string> {
  const texts = new Map<string, string>();
  for (const imp of impressions) {
    const text = corpus.get(imp.docId);
    if (text === undefined) {
      stats.missingDocs += 1;
    } else {
      texts.set(imp.docId, text);
    }
  }
  return texts;
}

function buildGroups(
  sessions: Session[],
  corpus: Map<string, string>,
  queryFor: (session: Session, turnIndex: number) => string,
  stats: GroupBuildStats,
): TrainingGroup[] {
  const groups: TrainingGroup[] = [];
  for (const session of sessions) {
    session.turns.forEach((turn, turnIndex) => {
      const clicked = turn.impressions.filter((imp) => imp.clicked);
      if (clicked.length === 0) {
        stats.turnsWithoutClicks += 1;
        return;
      }
      const texts = resolveDocs(turn.impressions, corpus, stats);
      const negatives = turn.impressions.filter(
        (imp) => !imp.clicked && texts.has(imp.docId),
      );
      for (const pos of clicked) {
        const positiveText = texts.get(pos.docId);
        if (positiveText === undefined) continue; // counted in missingDocs
        groups.push({
          groupKey: turnKey(session.sessionId, turnIndex),
          queryText: queryFor(session, turnIndex),
          positiveDoc: positiveText,
          negatives: negatives.map((imp) => texts.get(imp.docId)!),
          docIds: [pos.docId, ...negatives.map((imp) => imp.docId)],
        });
      }
    });
  }
  return groups;
}

/** Groups whose query is the turn's raw query text. */
export function buildAdhocGroups(
  sessions: Session[],
  corpus: Map<string, string>,
  stats: GroupBuildStats = { turnsWithoutClicks: 0, missingDocs: 0 },
): TrainingGroup[] {
  return buildGroups(sessions, corpus, (s, i) => s.turns[i].queryText, stats);
}

/**
 * Groups whose query is the assembled session query imported from the
 * ranking pipeline's ASQ TSV (the single source of truth for ASQ strings).
 */
export function buildSessionGroups(
  sessions: Session[],
  corpus: Map<string, string>,
  asqByKey: Map<string, string>,
  stats: GroupBuildStats = { turnsWithoutClicks: 0, missingDocs: 0 },
): TrainingGroup[] {
  return buildGroups(
    sessions,
    corpus,
    (session, turnIndex) => {
      const key = turnKey(session.sessionId, turnIndex);
      const asq = asqByKey.get(key);
      if (asq === undefined) throw new MissingAsqRowError(key);
      return asq;
    },
    stats,
  );
}

/** One scoring group per turn covering every resolvable impression. */
export function buildScoringGroups(
  sessions: Session[],
  corpus: Map<string, string>,
  asqByKey?: Map<string, string>,
  stats: GroupBuildStats = { turnsWithoutClicks: 0, missingDocs: 0 },
): ScoringGroup[] {
  const groups: ScoringGroup[] = [];
  for (const session of sessions) {
    session.turns.forEach((turn, turnIndex) => {
      const key = turnKey(session.sessionId, turnIndex);
      let queryText = turn.queryText;
      if (asqByKey) {
        const asq = asqByKey.get(key);
        if (asq === undefined) throw new MissingAsqRowError(key);
        queryText = asq;
      }
      const texts = resolveDocs(turn.impressions, corpus, stats);
      const ids = turn.impressions
        .map((imp) => imp.docId)
        .filter((id) => texts.has(id));
      if (ids.length === 0) return;
      groups.push({
        groupKey: key,
        queryText,
        docIds: ids,
        docs: ids.map((id) => texts.get(id)!),
      });
    });
  }
  return groups;
}

/** ASQ TSV from the ranking pipeline: `session:turn<TAB>asq string`. */
export function parseAsqTsv(text: string): Map<string, string> {
  const rows = new Map<string, string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const tab = line.indexOf('\t');
    if (tab <= 0) throw new ParseError(i + 1, "expected 'group_key<TAB>asq'");
    rows.set(line.slice(0, tab), line.slice(tab + 1));
  }
  return rows;
}

/** Click labels of a training group: 1 for the positive, 0 elsewhere. */
export function groupLabels(group: TrainingGroup): number[] {
  return group.docIds.map((_, i) => (i === 0 ? 1 : 0));
}
