"""Corpus statistics and the three lexical relevance scorers.

All three scorers are sums over query terms, so they are linear in query
term multiplicity and return 0.0 for queries sharing no terms with the
document. IDF choices are non-negative by construction.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .data import Corpus, Document, Query
from .errors import EmptyCorpus


@dataclass(frozen=True)
class CorpusStats:
    n_docs: int
    avgdl: float
    df: dict[str, int]
    built_over: int

    def df_of(self, term: str) -> int:
        return self.df.get(term, 0)


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 2.0
    b: float = 0.5

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


@dataclass(frozen=True)
class F1ExpParams:
    s: float = 0.5
    k: float = 0.35

    def __post_init__(self):
        if self.s <= 0:
            raise ValueError("s must be > 0")
        if self.k <= 0:
            raise ValueError("k must be > 0")


def build_stats(corpus: Corpus) -> CorpusStats:
    """Document frequencies and average token length over the corpus."""
    if len(corpus) == 0:
        raise EmptyCorpus("cannot build stats over an empty corpus")
    df: Counter[str] = Counter()
    total_len = 0
    for doc in corpus:
        total_len += doc.token_length
        df.update(set(doc.text))
    return CorpusStats(
        n_docs=len(corpus),
        avgdl=total_len / len(corpus),
        df=dict(df),
        built_over=len(corpus),
    )


def bm25(q: Query, d: Document, stats: CorpusStats, p: Bm25Params = Bm25Params()) -> float:
    """Okapi BM25 with the smoothed non-negative IDF ln(1 + (N-df+0.5)/(df+0.5)).

    Terms absent from the document or out of vocabulary contribute 0.
    """
    if not q.text:
        return 0.0
    tf = Counter(d.text)
    norm = p.k1 * (1.0 - p.b + p.b * d.token_length / stats.avgdl)
    score = 0.0
    for term in q.text:
        t = tf[term]
        if t == 0:
            continue
        dft = stats.df_of(term)
        if dft == 0:
            continue
        idf = math.log(1.0 + (stats.n_docs - dft + 0.5) / (dft + 0.5))
        score += idf * t * (p.k1 + 1.0) / (t + norm)
    return score


def tfidf(q: Query, d: Document, stats: CorpusStats) -> float:
    """Raw term frequency times ln(N / df)."""
    if not q.text:
        return 0.0
    tf = Counter(d.text)
    score = 0.0
    for term in q.text:
        t = tf[term]
        if t == 0:
            continue
        dft = stats.df_of(term)
        if dft == 0:
            continue
        score += t * math.log(stats.n_docs / dft)
    return score


def f1exp(q: Query, d: Document, stats: CorpusStats, p: F1ExpParams = F1ExpParams()) -> float:
    """Axiomatic F1EXP: sum over terms matched in both query and document of
    C(t,q) * F(C(t,d)) * LN(d) * ((N+1)/df)^k with F(x) = 1 + ln(1 + ln(x))
    and LN(d) = (avgdl+s) / (avgdl + len(d)*s).

    Terms with zero document frequency in the query are skipped (F is
    undefined at 0).
    """
    if not q.text:
        return 0.0
    qtf = Counter(q.text)
    dtf = Counter(d.text)
    ln_d = (stats.avgdl + p.s) / (stats.avgdl + d.token_length * p.s)
    score = 0.0
    for term, ctq in qtf.items():
        ctd = dtf[term]
        if ctd == 0:
            continue
        dft = stats.df_of(term)
        if dft == 0:
            continue
        f_x = 1.0 + math.log(1.0 + math.log(ctd))
        score += ctq * f_x * ln_d * ((stats.n_docs + 1.0) / dft) ** p.k
    return score
