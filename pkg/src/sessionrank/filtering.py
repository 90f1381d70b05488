"""Removal of meaningless candidate documents before ranking.

Soft-404s, error pages and placeholder stubs are detected with three rule
kinds, checked in order: whole-document exact match (after trimming),
banned phrase (substring of the raw text), and minimum token length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .data import Corpus, Document
from .errors import MalformedLine

# Covers every exemplar among the bundled meaningless-document samples.
DEFAULT_BANNED_PHRASES = (
    "404 Not Found",
    "页面不存在",
    "访问的页面丢失",
    "requested resource is not found",
    "Page Not Found",
    "403 Forbidden",
    "页面未找到",
    "找不到页面",
)
DEFAULT_BANNED_EXACT = ("<unk>", "搜到搜索结果")
DEFAULT_MIN_TOKEN_LENGTH = 5


@dataclass(frozen=True)
class MatchedRule:
    kind: str  # "exact" | "phrase" | "minlen"
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}:{self.detail}"


@dataclass(frozen=True)
class FilterRules:
    min_token_length: int = DEFAULT_MIN_TOKEN_LENGTH
    banned_exact: frozenset[str] = frozenset(DEFAULT_BANNED_EXACT)
    banned_phrases: tuple[str, ...] = DEFAULT_BANNED_PHRASES

    def __post_init__(self):
        if self.min_token_length < 0:
            raise ValueError("min_token_length must be >= 0")
        if any(not p for p in self.banned_phrases):
            raise ValueError("banned phrases must be non-empty strings")


@dataclass
class FilterReport:
    kept: int = 0
    removed: int = 0
    removals: list[tuple[str, MatchedRule]] = field(default_factory=list)


def is_filtered(doc: Document, rules: FilterRules) -> MatchedRule | None:
    """First matching rule (exact, then phrase, then length) or None."""
    trimmed = doc.raw_text.strip()
    if trimmed in rules.banned_exact:
        return MatchedRule("exact", trimmed)
    for phrase in rules.banned_phrases:
        if phrase in doc.raw_text:
            return MatchedRule("phrase", phrase)
    if doc.token_length < rules.min_token_length:
        return MatchedRule("minlen", str(rules.min_token_length))
    return None


def filter_corpus(corpus: Corpus, rules: FilterRules) -> tuple[Corpus, FilterReport]:
    """Partition the corpus into kept documents and a removal report.

    Iteration (hence removal order) follows corpus order, sorted by doc_id.
    """
    kept = Corpus()
    report = FilterReport()
    for doc in corpus:
        matched = is_filtered(doc, rules)
        if matched is None:
            kept.add(doc)
            report.kept += 1
        else:
            report.removed += 1
            report.removals.append((doc.doc_id, matched))
    return kept, report


def parse_rules(lines) -> FilterRules:
    """Parse a rules file: one `phrase <text>` / `exact <text>` / `minlen <int>`
    directive per line; `#` starts a comment."""
    phrases: list[str] = []
    exact: set[str] = set()
    minlen = DEFAULT_MIN_TOKEN_LENGTH
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(None, 1)
        directive = parts[0]
        arg = parts[1] if len(parts) > 1 else ""
        if directive == "phrase":
            if not arg:
                raise MalformedLine(line_no, "phrase directive needs text")
            phrases.append(arg)
        elif directive == "exact":
            if not arg:
                raise MalformedLine(line_no, "exact directive needs text")
            exact.add(arg)
        elif directive == "minlen":
            try:
                minlen = int(arg)
            except ValueError:
                raise MalformedLine(line_no, f"bad minlen {arg!r}") from None
        else:
            raise MalformedLine(line_no, f"unknown directive {directive!r}")
    return FilterRules(
        min_token_length=minlen,
        banned_exact=frozenset(exact),
        banned_phrases=tuple(phrases),
    )


def load_rules(path: str | Path) -> FilterRules:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh)


def write_report(report: FilterReport, sink: IO[str]) -> None:
    sink.write(f"#kept {report.kept}\n#removed {report.removed}\n")
    for doc_id, rule in report.removals:
        sink.write(f"{doc_id}\t{rule.kind}\t{rule.detail}\n")
