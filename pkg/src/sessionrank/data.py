"""Core domain types and parsers for the corpus and the session-log format.

The session log is a plain-text file: a ``SessionID <id>`` header opens a
session, turns are separated by ``-----`` lines, each turn starts with a
header line ``<query text> <qid> <issue_time>`` followed by one impression
per line: ``<rank> <url> <doc_id> <title...> <clicked> <click_time>``.
Titles may contain spaces, so impression fields are positional from both
ends (three from the left, two from the right).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import (
    DuplicateDocId,
    DuplicateSessionId,
    MalformedLine,
    UnreadableSource,
)

SEPARATOR = "-----"


def tokenize(raw: str) -> list[str]:
    """Split on runs of whitespace, dropping empty tokens.

    No case folding and no CJK segmentation: the corpus text arrives
    pre-segmented.
    """
    return raw.split()


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: tuple[str, ...]
    raw_text: str

    @classmethod
    def from_raw(cls, doc_id: str, raw_text: str) -> "Document":
        return cls(doc_id=doc_id, text=tuple(tokenize(raw_text)), raw_text=raw_text)

    @property
    def char_length(self) -> int:
        return len(self.raw_text)

    @property
    def token_length(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class Query:
    qid: str
    text: tuple[str, ...]

    @classmethod
    def from_raw(cls, qid: str, raw_text: str) -> "Query":
        return cls(qid=qid, text=tuple(tokenize(raw_text)))

    @property
    def token_length(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class Impression:
    rank: int
    url: str
    doc_id: str
    title: str
    clicked: bool
    click_time: float | None = None

    def __post_init__(self):
        if not self.clicked and self.click_time is not None:
            raise ValueError("unclicked impression cannot carry a click_time")


@dataclass(frozen=True)
class QueryTurn:
    query: Query
    issue_time: float
    impressions: tuple[Impression, ...]

    def __post_init__(self):
        ranks = [imp.rank for imp in self.impressions]
        if ranks != list(range(1, len(ranks) + 1)):
            raise ValueError(f"impression ranks must be contiguous from 1, got {ranks}")

    def clicked_impressions(self) -> list[Impression]:
        """Clicks of this turn ordered by click time (rank breaks ties)."""
        clicked = [imp for imp in self.impressions if imp.clicked]
        clicked.sort(key=lambda imp: (imp.click_time if imp.click_time is not None else 0.0, imp.rank))
        return clicked


@dataclass(frozen=True)
class Session:
    session_id: str
    turns: tuple[QueryTurn, ...]


class Corpus:
    """Document container with unique ids and deterministic iteration order."""

    def __init__(self, documents: Iterable[Document] = ()):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            self.add(doc)

    def add(self, doc: Document) -> None:
        if not doc.doc_id:
            raise DuplicateDocId("empty doc_id")
        if doc.doc_id in self._docs:
            raise DuplicateDocId(f"duplicate doc_id {doc.doc_id!r}")
        self._docs[doc.doc_id] = doc

    def get(self, doc_id: str) -> Document | None:
        return self._docs.get(doc_id)

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        """Iterate documents sorted by doc_id (stable downstream order)."""
        for doc_id in sorted(self._docs):
            yield self._docs[doc_id]

    def doc_ids(self) -> list[str]:
        return sorted(self._docs)


# ---------------------------------------------------------------------------
# Session-log parsing
# ---------------------------------------------------------------------------

def _parse_turn_header(line: str, line_no: int) -> tuple[Query, float]:
    parts = line.split()
    if len(parts) < 3:
        raise MalformedLine(line_no, f"turn header needs '<query> <qid> <time>', got {line!r}")
    qid = parts[-2]
    try:
        issue_time = float(parts[-1])
    except ValueError:
        raise MalformedLine(line_no, f"bad issue_time {parts[-1]!r}") from None
    query = Query(qid=qid, text=tuple(parts[:-2]))
    return query, issue_time


def _parse_impression(line: str, line_no: int) -> Impression:
    parts = line.split()
    if len(parts) < 5:
        raise MalformedLine(line_no, f"impression needs >= 5 fields, got {len(parts)}")
    try:
        rank = int(parts[0])
    except ValueError:
        raise MalformedLine(line_no, f"bad rank {parts[0]!r}") from None
    if rank < 1:
        raise MalformedLine(line_no, f"rank must be >= 1, got {rank}")
    url, doc_id = parts[1], parts[2]
    clicked_raw, time_raw = parts[-2], parts[-1]
    if clicked_raw not in ("0", "1"):
        raise MalformedLine(line_no, f"clicked flag must be 0 or 1, got {clicked_raw!r}")
    clicked = clicked_raw == "1"
    try:
        click_time = float(time_raw)
    except ValueError:
        raise MalformedLine(line_no, f"bad click_time {time_raw!r}") from None
    if not clicked and click_time != -1:
        raise MalformedLine(line_no, "unclicked impression must have click_time -1")
    title = " ".join(parts[3:-2])
    return Impression(
        rank=rank,
        url=url,
        doc_id=doc_id,
        title=title,
        clicked=clicked,
        click_time=click_time if clicked else None,
    )


def parse_session_log(text: str) -> list[Session]:
    """Parse a session log into Sessions; aborts with MalformedLine on bad input."""
    sessions: list[Session] = []
    seen_ids: set[str] = set()

    cur_id: str | None = None
    cur_turns: list[QueryTurn] = []
    block: list[tuple[int, str]] = []  # (line_no, line) of the open turn block

    def close_block():
        if not block:
            return
        line_no, header = block[0]
        query, issue_time = _parse_turn_header(header, line_no)
        impressions = [_parse_impression(ln, no) for no, ln in block[1:]]
        try:
            turn = QueryTurn(query=query, issue_time=issue_time, impressions=tuple(impressions))
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
        cur_turns.append(turn)
        block.clear()

    def close_session():
        nonlocal cur_id
        close_block()
        if cur_id is not None:
            sessions.append(Session(session_id=cur_id, turns=tuple(cur_turns)))
            cur_id = None
            cur_turns.clear()

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("SessionID"):
            parts = line.split()
            if len(parts) != 2:
                raise MalformedLine(line_no, f"bad session header {line!r}")
            close_session()
            if parts[1] in seen_ids:
                raise DuplicateSessionId(f"duplicate session id {parts[1]!r}")
            seen_ids.add(parts[1])
            cur_id = parts[1]
        elif line == SEPARATOR:
            if cur_id is None:
                raise MalformedLine(line_no, "separator before any SessionID header")
            close_block()
            block.clear()
        else:
            if cur_id is None:
                raise MalformedLine(line_no, "content before any SessionID header")
            block.append((line_no, line))
    close_session()
    return sessions


def serialize_session_log(sessions: Iterable[Session]) -> str:
    """Inverse of parse_session_log (round-trips up to whitespace normalization)."""
    out: list[str] = []
    for session in sessions:
        out.append(f"SessionID {session.session_id}")
        for turn in session.turns:
            out.append(SEPARATOR)
            out.append(f"{' '.join(turn.query.text)} {turn.query.qid} {turn.issue_time}")
            for imp in turn.impressions:
                clicked = "1" if imp.clicked else "0"
                ctime = imp.click_time if imp.clicked else -1
                fields = [str(imp.rank), imp.url, imp.doc_id]
                if imp.title:
                    fields.append(imp.title)
                fields += [clicked, str(ctime)]
                out.append(" ".join(fields))
    return "\n".join(out) + ("\n" if out else "")


# ---------------------------------------------------------------------------
# Corpus loading
# ---------------------------------------------------------------------------

def load_corpus_tsv(lines: Iterable[str]) -> Corpus:
    """Load a corpus from `doc_id<TAB>raw_text` lines."""
    corpus = Corpus()
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if "\t" not in line:
            raise MalformedLine(line_no, "expected 'doc_id<TAB>raw_text'")
        doc_id, raw_text = line.split("\t", 1)
        if not doc_id:
            raise MalformedLine(line_no, "empty doc_id")
        corpus.add(Document.from_raw(doc_id, raw_text))
    return corpus


def load_corpus_dir(path: str | Path) -> Corpus:
    """Load a corpus from a directory of `<doc_id>.txt` files."""
    path = Path(path)
    if not path.is_dir():
        raise UnreadableSource(f"not a directory: {path}")
    corpus = Corpus()
    for name in sorted(os.listdir(path)):
        if not name.endswith(".txt"):
            continue
        doc_id = name[: -len(".txt")]
        try:
            raw_text = (path / name).read_text(encoding="utf-8").rstrip("\n")
        except OSError as exc:
            raise UnreadableSource(f"cannot read {path / name}: {exc}") from None
        corpus.add(Document.from_raw(doc_id, raw_text))
    return corpus


def load_corpus(source: str | Path | IO[str]) -> Corpus:
    """Load from a directory of `<doc_id>.txt` files or a TSV file/stream."""
    if hasattr(source, "read"):
        return load_corpus_tsv(source)  # type: ignore[arg-type]
    path = Path(source)
    if path.is_dir():
        return load_corpus_dir(path)
    if path.is_file():
        with open(path, encoding="utf-8") as fh:
            return load_corpus_tsv(fh)
    raise UnreadableSource(f"no such file or directory: {path}")


def write_corpus_tsv(corpus: Corpus, sink: IO[str]) -> None:
    for doc in corpus:
        sink.write(f"{doc.doc_id}\t{doc.raw_text}\n")


# ---------------------------------------------------------------------------
# Validation (reports problems, never mutates)
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    missing_doc_ids: list[tuple[str, str]] = field(default_factory=list)  # (session:turn, doc_id)
    unordered_sessions: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.missing_doc_ids and not self.unordered_sessions


def validate_sessions(sessions: Iterable[Session], corpus: Corpus) -> ValidationReport:
    """Report impressions whose doc_id is absent from the corpus and
    sessions whose turns are not in chronological order."""
    report = ValidationReport()
    for session in sessions:
        times = [t.issue_time for t in session.turns]
        if any(a > b for a, b in zip(times, times[1:])):
            report.unordered_sessions.append(session.session_id)
        for turn_no, turn in enumerate(session.turns, start=1):
            for imp in turn.impressions:
                if imp.doc_id not in corpus:
                    report.missing_doc_ids.append((f"{session.session_id}:{turn_no}", imp.doc_id))
    return report


def turn_group_key(session: Session, turn_index: int) -> str:
    """Group key for a session turn: `<session_id>:<turn_no>` with 1-based turns."""
    return f"{session.session_id}:{turn_index + 1}"
