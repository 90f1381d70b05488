"""Feature extraction for the two pipelines, ASQ strings, and file formats.

Two fixed schemas:

  atm  (8)  — [bm25, rank_bm25, tfidf, rank_tfidf, f1exp, rank_f1exp,
               doc_token_length, query_token_length]
  pmtm (11) — [doc_token_length, query_token_length, numeric_doc_id,
               score_adhoc, score_session, bm25, tfidf, f1exp,
               rank_bm25, rank_tfidf, rank_f1exp]

Feature files use the RankLib/SVMlight line format
``<label> qid:<group_key> 1:<v1> ... n:<vn> # <doc_id>`` with a leading
``#schema <name>`` comment. External scores travel as
``group_key<TAB>doc_id<TAB>score`` TSV — the contract with the neural
reranker component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .data import Corpus, Document, Query, Session, turn_group_key
from .errors import (
    EmptyCandidateSet,
    IndexOutOfRange,
    MalformedFeatureLine,
    MalformedLine,
    UnparseableDocId,
)
from .scoring import Bm25Params, CorpusStats, F1ExpParams, bm25, f1exp, tfidf

SCHEMA_SIZES = {"atm": 8, "pmtm": 11}

ATM_FEATURE_NAMES = (
    "bm25", "rank_bm25", "tfidf", "rank_tfidf",
    "f1exp", "rank_f1exp", "doc_len", "query_len",
)
PMTM_FEATURE_NAMES = (
    "doc_len", "query_len", "doc_id_num", "score_adhoc", "score_session",
    "bm25", "tfidf", "f1exp", "rank_bm25", "rank_tfidf", "rank_f1exp",
)


@dataclass(frozen=True)
class FeatureVector:
    group_key: str
    doc_id: str
    label: int
    values: tuple[float, ...]
    schema: str

    def __post_init__(self):
        expected = SCHEMA_SIZES.get(self.schema)
        if expected is not None and len(self.values) != expected:
            raise ValueError(
                f"schema {self.schema!r} needs {expected} values, got {len(self.values)}"
            )
        if any(not math.isfinite(v) for v in self.values):
            raise ValueError(f"non-finite feature value for {self.doc_id!r}")
        if self.label < 0:
            raise ValueError("label must be >= 0")


class ExternalScores:
    """Scores keyed by (group_key, doc_id); lookups of absent pairs return
    0.0 and are counted in `misses`."""

    def __init__(self, scores: Mapping[tuple[str, str], float] | None = None):
        self.scores: dict[tuple[str, str], float] = dict(scores or {})
        for value in self.scores.values():
            if not math.isfinite(value):
                raise ValueError("external scores must be finite")
        self.misses = 0

    def get(self, group_key: str, doc_id: str) -> float:
        try:
            return self.scores[(group_key, doc_id)]
        except KeyError:
            self.misses += 1
            return 0.0

    def __len__(self) -> int:
        return len(self.scores)


def rank_feature(scores: Sequence[tuple[str, float]]) -> dict[str, int]:
    """Rank 1 = highest score; ties broken by doc_id ascending."""
    ids = [doc_id for doc_id, _ in scores]
    if len(set(ids)) != len(ids):
        raise ValueError("doc_ids must be distinct")
    ordered = sorted(scores, key=lambda item: (-item[1], item[0]))
    return {doc_id: rank for rank, (doc_id, _) in enumerate(ordered, start=1)}


def numeric_doc_id(doc_id: str) -> float:
    """Numeric suffix of a doc id: 'd209' -> 209.0."""
    raw = doc_id[1:] if doc_id.startswith("d") else doc_id
    try:
        return float(int(raw))
    except ValueError:
        raise UnparseableDocId(f"cannot parse numeric id from {doc_id!r}") from None


def _score_candidates(
    q: Query,
    candidates: Sequence[Document],
    stats: CorpusStats,
    bm25_params: Bm25Params,
    f1exp_params: F1ExpParams,
):
    s_bm25 = [(d.doc_id, bm25(q, d, stats, bm25_params)) for d in candidates]
    s_tfidf = [(d.doc_id, tfidf(q, d, stats)) for d in candidates]
    s_f1exp = [(d.doc_id, f1exp(q, d, stats, f1exp_params)) for d in candidates]
    return (
        dict(s_bm25), rank_feature(s_bm25),
        dict(s_tfidf), rank_feature(s_tfidf),
        dict(s_f1exp), rank_feature(s_f1exp),
    )


def extract_atm(
    q: Query,
    candidates: Sequence[Document],
    stats: CorpusStats,
    bm25_params: Bm25Params = Bm25Params(),
    f1exp_params: F1ExpParams = F1ExpParams(),
    group_key: str | None = None,
    labels: Mapping[str, int] | None = None,
) -> list[FeatureVector]:
    """ATM feature vectors for one candidate group; ranks are computed
    within the group. Labels default to 0."""
    if not candidates:
        raise EmptyCandidateSet(f"no candidates for query {q.qid!r}")
    key = group_key if group_key is not None else q.qid
    labels = labels or {}
    v_bm25, r_bm25, v_tfidf, r_tfidf, v_f1, r_f1 = _score_candidates(
        q, candidates, stats, bm25_params, f1exp_params
    )
    vectors = []
    for d in candidates:
        values = (
            v_bm25[d.doc_id], float(r_bm25[d.doc_id]),
            v_tfidf[d.doc_id], float(r_tfidf[d.doc_id]),
            v_f1[d.doc_id], float(r_f1[d.doc_id]),
            float(d.token_length), float(q.token_length),
        )
        vectors.append(FeatureVector(key, d.doc_id, labels.get(d.doc_id, 0), values, "atm"))
    return vectors


def extract_pmtm(
    q: Query,
    candidates: Sequence[Document],
    stats: CorpusStats,
    adhoc_scores: ExternalScores,
    session_scores: ExternalScores,
    bm25_params: Bm25Params = Bm25Params(),
    f1exp_params: F1ExpParams = F1ExpParams(),
    group_key: str | None = None,
    labels: Mapping[str, int] | None = None,
    drop_docid: bool = False,
) -> list[FeatureVector]:
    """PMTM feature vectors: ATM signals plus the two fine-tuned reranker
    scores and the numeric doc id. Missing external scores become 0.0 and
    are counted on the ExternalScores objects. With drop_docid the doc-id
    feature is zeroed (constant features are invisible to tree splits)."""
    if not candidates:
        raise EmptyCandidateSet(f"no candidates for query {q.qid!r}")
    key = group_key if group_key is not None else q.qid
    labels = labels or {}
    v_bm25, r_bm25, v_tfidf, r_tfidf, v_f1, r_f1 = _score_candidates(
        q, candidates, stats, bm25_params, f1exp_params
    )
    vectors = []
    for d in candidates:
        doc_id_feature = 0.0 if drop_docid else numeric_doc_id(d.doc_id)
        values = (
            float(d.token_length), float(q.token_length), doc_id_feature,
            adhoc_scores.get(key, d.doc_id), session_scores.get(key, d.doc_id),
            v_bm25[d.doc_id], v_tfidf[d.doc_id], v_f1[d.doc_id],
            float(r_bm25[d.doc_id]), float(r_tfidf[d.doc_id]), float(r_f1[d.doc_id]),
        )
        vectors.append(FeatureVector(key, d.doc_id, labels.get(d.doc_id, 0), values, "pmtm"))
    return vectors


# ---------------------------------------------------------------------------
# Assembled Session Query
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsqCaps:
    max_queries: int = 5
    max_titles: int = 5


def assemble_session_query(
    session: Session,
    turn_index: int,
    corpus: Corpus | None = None,
    caps: AsqCaps = AsqCaps(),
) -> str:
    """Build ``[CLS]cq[SEP]pq[SEP]tcd`` for one turn.

    cq is the current query text; pq the previous queries of the session in
    chronological order; tcd the titles of impressions clicked strictly
    before the current turn, in click order. pq and tcd keep only the most
    recent `caps` items and are joined with single spaces. The corpus is
    accepted for interface symmetry with the extractors; titles come from
    the session log itself.
    """
    if not 0 <= turn_index < len(session.turns):
        raise IndexOutOfRange(
            f"turn index {turn_index} out of range for session {session.session_id!r}"
        )
    cq = " ".join(session.turns[turn_index].query.text)
    previous = [" ".join(t.query.text) for t in session.turns[:turn_index]]
    titles = [
        imp.title
        for turn in session.turns[:turn_index]
        for imp in turn.clicked_impressions()
    ]
    pq = " ".join(previous[-caps.max_queries:]) if caps.max_queries > 0 else ""
    tcd = " ".join(titles[-caps.max_titles:]) if caps.max_titles > 0 else ""
    return f"[CLS]{cq}[SEP]{pq}[SEP]{tcd}"


def click_labels(turn) -> dict[str, int]:
    """label = 1 iff the impression was clicked."""
    return {imp.doc_id: int(imp.clicked) for imp in turn.impressions}


@dataclass
class ExtractionStats:
    turns: int = 0
    skipped_turns: int = 0  # no surviving candidates
    missing_docs: int = 0   # impressions whose doc_id is not in the corpus
    filtered_docs: int = 0  # impressions removed by filter rules


def session_candidates(
    sessions: Iterable[Session],
    corpus: Corpus,
    stats_out: ExtractionStats | None = None,
):
    """Yield (group_key, turn, candidate documents) per turn.

    The corpus is expected to be pre-filtered; impressions whose documents
    are absent are skipped and counted.
    """
    ex = stats_out if stats_out is not None else ExtractionStats()
    for session in sessions:
        for turn_index, turn in enumerate(session.turns):
            ex.turns += 1
            docs = []
            for imp in turn.impressions:
                doc = corpus.get(imp.doc_id)
                if doc is None:
                    ex.missing_docs += 1
                    continue
                docs.append(doc)
            if not docs:
                ex.skipped_turns += 1
                continue
            yield turn_group_key(session, turn_index), turn, docs


# ---------------------------------------------------------------------------
# RankLib-compatible feature file format
# ---------------------------------------------------------------------------

def format_value(v: float) -> str:
    return f"{v:.9g}"


def write_ranklib(vectors: Iterable[FeatureVector], sink: IO[str]) -> None:
    wrote_header = False
    schema = None
    for vec in vectors:
        if not wrote_header:
            schema = vec.schema
            sink.write(f"#schema {schema}\n")
            wrote_header = True
        if vec.schema != schema:
            raise ValueError(f"mixed schemas in one file: {schema!r} vs {vec.schema!r}")
        feats = " ".join(f"{i}:{format_value(v)}" for i, v in enumerate(vec.values, start=1))
        sink.write(f"{vec.label} qid:{vec.group_key} {feats} # {vec.doc_id}\n")


def read_ranklib(source: Iterable[str]) -> list[FeatureVector]:
    vectors: list[FeatureVector] = []
    schema: str | None = None
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "schema":
                schema = parts[1]
            continue
        doc_id = ""
        if " # " in line:
            line, doc_id = line.rsplit(" # ", 1)
            doc_id = doc_id.strip()
        tokens = line.split()
        if len(tokens) < 2 or not tokens[1].startswith("qid:"):
            raise MalformedFeatureLine(line_no, "expected '<label> qid:<key> ...'")
        try:
            label = int(tokens[0])
        except ValueError:
            raise MalformedFeatureLine(line_no, f"bad label {tokens[0]!r}") from None
        group_key = tokens[1][len("qid:"):]
        if not group_key:
            raise MalformedFeatureLine(line_no, "empty qid")
        values: list[float] = []
        for tok in tokens[2:]:
            if ":" not in tok:
                raise MalformedFeatureLine(line_no, f"bad feature token {tok!r}")
            idx_raw, val_raw = tok.split(":", 1)
            try:
                idx = int(idx_raw)
                val = float(val_raw)
            except ValueError:
                raise MalformedFeatureLine(line_no, f"bad feature token {tok!r}") from None
            if idx != len(values) + 1:
                raise MalformedFeatureLine(line_no, f"feature indices must be 1..n, got {idx}")
            values.append(val)
        file_schema = schema if schema is not None else f"custom{len(values)}"
        expected = SCHEMA_SIZES.get(file_schema)
        if expected is not None and len(values) != expected:
            raise MalformedFeatureLine(
                line_no, f"schema {file_schema!r} needs {expected} features, got {len(values)}"
            )
        try:
            vectors.append(FeatureVector(group_key, doc_id, label, tuple(values), file_schema))
        except ValueError as exc:
            raise MalformedFeatureLine(line_no, str(exc)) from None
    return vectors


def group_vectors(vectors: Iterable[FeatureVector]) -> dict[str, list[FeatureVector]]:
    """Group by group_key preserving first-seen group order and row order."""
    groups: dict[str, list[FeatureVector]] = {}
    for vec in vectors:
        groups.setdefault(vec.group_key, []).append(vec)
    return groups


# ---------------------------------------------------------------------------
# External-score TSV (contract with the neural reranker component)
# ---------------------------------------------------------------------------

def read_external_scores(source: Iterable[str]) -> ExternalScores:
    scores: dict[tuple[str, str], float] = {}
    for line_no, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedLine(line_no, "expected 'group_key<TAB>doc_id<TAB>score'")
        try:
            value = float(parts[2])
        except ValueError:
            raise MalformedLine(line_no, f"bad score {parts[2]!r}") from None
        if not math.isfinite(value):
            raise MalformedLine(line_no, f"non-finite score {parts[2]!r}")
        scores[(parts[0], parts[1])] = value
    return ExternalScores(scores)


def write_external_scores(scores: ExternalScores, sink: IO[str]) -> None:
    for (group_key, doc_id), value in sorted(scores.scores.items()):
        sink.write(f"{group_key}\t{doc_id}\t{format_value(value)}\n")
