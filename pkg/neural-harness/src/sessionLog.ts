/**
 * Reader for the session-log and corpus formats produced upstream.
 *
 * Session log: `SessionID <id>` opens a session, `-----` separates turns,
 * a turn starts with `<query text> <qid> <issue_time>` and is followed by
 * impression lines `<rank> <url> <doc_id> <title…> <clicked> <click_time>`
 * (title may contain spaces; -1 click time means "not clicked").
 * Corpus: TSV of `doc_id<TAB>raw text`.
 */

import { ParseError } from './errors.js';

export interface Impression {
  rank: number;
  url: string;
  docId: string;
  title: string;
  clicked: boolean;
  clickTime: number | null;
}

export interface QueryTurn {
  qid: string;
  queryText: string;
  issueTime: number;
  impressions: Impression[];
}

export interface Session {
  sessionId: string;
  turns: QueryTurn[];
}

const SEPARATOR = '-----';

function parseImpression(line: string, lineNo: number): Impression {
  const parts = line.split(/\s+/);
  if (parts.length < 5) {
    throw new ParseError(lineNo, `impression needs >= 5 fields, got ${parts.length}`);
  }
  const rank = Number(parts[0]);
  if (!Number.isInteger(rank) || rank < 1) {
    throw new ParseError(lineNo, `bad rank ${parts[0]}`);
  }
  const clickedRaw = parts[parts.length - 2];
  if (clickedRaw !== '0' && clickedRaw !== '1') {
    throw new ParseError(lineNo, `clicked flag must be 0 or 1, got ${clickedRaw}`);
  }
  const clicked = clickedRaw === '1';
  const clickTime = Number(parts[parts.length - 1]);
  if (Number.isNaN(clickTime)) {
    throw new ParseError(lineNo, `bad click time ${parts[parts.length - 1]}`);
  }
  return {
    rank,
    url: parts[1],
    docId: parts[2],
    title: parts.slice(3, -2).join(' '),
    clicked,
    clickTime: clicked ? clickTime : null,
  };
}

function parseTurn(block: Array<[number, string]>): QueryTurn {
  const [headerNo, header] = block[0];
  const parts = header.split(/\s+/);
  if (parts.length < 3) {
    throw new ParseError(headerNo, `turn header needs '<query> <qid> <time>', got '${header}'`);
  }
  const issueTime = Number(parts[parts.length - 1]);
  if (Number.isNaN(issueTime)) {
    throw new ParseError(headerNo, `bad issue time ${parts[parts.length - 1]}`);
  }
  return {
    qid: parts[parts.length - 2],
    queryText: parts.slice(0, -2).join(' '),
    issueTime,
    impressions: block.slice(1).map(([no, line]) => parseImpression(line, no)),
  };
}

export function parseSessionLog(text: string): Session[] {
  const sessions: Session[] = [];
  const seen = new Set<string>();
  let current: Session | null = null;
  let block: Array<[number, string]> = [];

  const closeBlock = () => {
    if (block.length === 0) return;
    current!.turns.push(parseTurn(block));
    block = [];
  };

  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    const lineNo = i + 1;
    if (!line) continue;
    if (line.startsWith('SessionID')) {
      const parts = line.split(/\s+/);
      if (parts.length !== 2) throw new ParseError(lineNo, `bad session header '${line}'`);
      if (current) closeBlock();
      if (seen.has(parts[1])) throw new ParseError(lineNo, `duplicate session id ${parts[1]}`);
      seen.add(parts[1]);
      current = { sessionId: parts[1], turns: [] };
      sessions.push(current);
    } else if (line === SEPARATOR) {
      if (!current) throw new ParseError(lineNo, 'separator before any SessionID header');
      closeBlock();
    } else {
      if (!current) throw new ParseError(lineNo, 'content before any SessionID header');
      block.push([lineNo, line]);
    }
  }
  if (current) closeBlock();
  return sessions;
}

/** Corpus TSV: `doc_id<TAB>raw text`, one document per line. */
export function parseCorpusTsv(text: string): Map<string, string> {
  const corpus = new Map<string, string>();
  const lines = text.split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i];
    if (!line.trim()) continue;
    const tab = line.indexOf('\t');
    if (tab <= 0) throw new ParseError(i + 1, "expected 'doc_id<TAB>raw_text'");
    const docId = line.slice(0, tab);
    if (corpus.has(docId)) throw new ParseError(i + 1, `duplicate doc_id ${docId}`);
    corpus.set(docId, line.slice(tab + 1));
  }
  return corpus;
}

/** Group key of a session turn: `<session_id>:<turn_no>`, turns 1-based. */
export function turnKey(sessionId: string, turnIndex: number): string {
  return `${sessionId}:${turnIndex + 1}`;
}
