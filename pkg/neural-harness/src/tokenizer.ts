/**
 * Character-level tokenizer with the special tokens the encoder expects.
 *
 * The "[CLS]" / "[SEP]" literals inside assembled queries are converted to
 * the native special-token ids here, at tensorization time; everything
 * else is one id per Unicode character (works for unsegmented CJK and
 * Latin alike at this model scale).
 */

export const PAD_ID = 0;
export const UNK_ID = 1;
export const CLS_ID = 2;
export const SEP_ID = 3;

const MARKER = /\[(CLS|SEP)\]/g;

export class CharTokenizer {
  private readonly index: Map<string, number>;

  constructor(chars: string[]) {
    this.index = new Map();
    for (const ch of chars) {
      if (!this.index.has(ch)) {
        this.index.set(ch, 4 + this.index.size);
      }
    }
  }

  /** Frequency-ordered vocabulary over the given texts (markers stripped). */
  static build(texts: Iterable<string>, maxVocab = 8000): CharTokenizer {
    const counts = new Map<string, number>();
    for (const text of texts) {
      for (const ch of Array.from(text.replace(MARKER, ''))) {
        counts.set(ch, (counts.get(ch) ?? 0) + 1);
      }
    }
    const ranked = [...counts.entries()]
      .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
      .slice(0, Math.max(0, maxVocab - 4))
      .map(([ch]) => ch);
    return new CharTokenizer(ranked);
  }

  get vocabSize(): number {
    return 4 + this.index.size;
  }

  private charId(ch: string): number {
    return this.index.get(ch) ?? UNK_ID;
  }

  /** Encode text that may contain [CLS]/[SEP] markers. */
  encodeMarked(text: string): number[] {
    const ids: number[] = [];
    let cursor = 0;
    MARKER.lastIndex = 0;
    for (let m = MARKER.exec(text); m !== null; m = MARKER.exec(text)) {
      for (const ch of Array.from(text.slice(cursor, m.index))) {
        ids.push(this.charId(ch));
      }
      ids.push(m[1] === 'CLS' ? CLS_ID : SEP_ID);
      cursor = m.index + m[0].length;
    }
    for (const ch of Array.from(text.slice(cursor))) {
      ids.push(this.charId(ch));
    }
    return ids;
  }

  /**
   * Full cross-encoder input: `[CLS] query [SEP] doc [SEP]` (the query part
   * may itself be an assembled query carrying internal separators). The
   * document is truncated from the tail so the result fits maxSeqLen.
   */
  encodeInput(queryOrAsq: string, doc: string, maxSeqLen: number): number[] {
    let prefix = this.encodeMarked(queryOrAsq);
    if (prefix[0] !== CLS_ID) prefix = [CLS_ID, ...prefix];
    // always leave room for the closing "[SEP] doc-char [SEP]"
    if (prefix.length > maxSeqLen - 3) prefix = prefix.slice(0, maxSeqLen - 3);
    const ids = [...prefix, SEP_ID];
    const room = maxSeqLen - ids.length - 1;
    const docChars = Array.from(doc).slice(0, room);
    for (const ch of docChars) ids.push(this.charId(ch));
    ids.push(SEP_ID);
    return ids;
  }

  /** Serializable form (id order), for checkpoint files. */
  toJSON(): { chars: string[] } {
    const chars = [...this.index.entries()]
      .sort((a, b) => a[1] - b[1])
      .map(([ch]) => ch);
    return { chars };
  }

  static fromJSON(data: { chars: string[] }): CharTokenizer {
    return new CharTokenizer(data.chars);
  }
}
