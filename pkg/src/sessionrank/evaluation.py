"""NDCG@k, run-file emission, and run evaluation against labels.

Gain is 2^label - 1 and the discount 1/log2(1+rank), matching the training
metric so reported and optimized quantities agree. Run files use the TREC
6-column format `group_key Q0 doc_id rank score run_tag`; qrels files are
`group_key 0 doc_id label`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Mapping, Sequence

from .errors import EmptyRun, MalformedLine
from .features import FeatureVector, format_value


def ndcg_at_k(labels_in_ranked_order: Sequence[int], k: int) -> float:
    """NDCG@k of a ranked label list; 0.0 when the ideal DCG is zero."""
    if k < 1:
        raise ValueError("k must be >= 1")

    def dcg(labels: Sequence[int]) -> float:
        return sum(
            (2.0 ** label - 1.0) / math.log2(i + 2.0)
            for i, label in enumerate(labels[:k])
        )

    ideal = dcg(sorted(labels_in_ranked_order, reverse=True))
    if ideal <= 0.0:
        return 0.0
    return dcg(labels_in_ranked_order) / ideal


@dataclass(frozen=True)
class RunEntry:
    group_key: str
    doc_id: str
    rank: int
    score: float
    run_tag: str = "sessionrank"


class Qrels:
    """Graded relevance labels keyed by (group_key, doc_id); missing pairs
    count as label 0."""

    def __init__(self, labels: Mapping[tuple[str, str], int] | None = None):
        self.labels: dict[tuple[str, str], int] = dict(labels or {})
        for value in self.labels.values():
            if value < 0:
                raise ValueError("labels must be >= 0")

    def get(self, group_key: str, doc_id: str) -> int:
        return self.labels.get((group_key, doc_id), 0)

    def __len__(self) -> int:
        return len(self.labels)


def rank_scored(
    group_key: str,
    scored: Sequence[tuple[str, float]],
    run_tag: str = "sessionrank",
) -> list[RunEntry]:
    """Entries sorted by score descending, ties by doc_id ascending,
    ranks 1..n."""
    ordered = sorted(scored, key=lambda item: (-item[1], item[0]))
    return [
        RunEntry(group_key=group_key, doc_id=doc_id, rank=rank, score=score, run_tag=run_tag)
        for rank, (doc_id, score) in enumerate(ordered, start=1)
    ]


def rerank(
    score_fn: Callable[[FeatureVector], float],
    groups: Mapping[str, Sequence[FeatureVector]],
    run_tag: str = "sessionrank",
) -> list[RunEntry]:
    """Score every candidate vector and emit ranked run entries per group."""
    entries: list[RunEntry] = []
    for group_key, vectors in groups.items():
        scored = [(vec.doc_id, score_fn(vec)) for vec in vectors]
        entries.extend(rank_scored(group_key, scored, run_tag))
    return entries


@dataclass
class EvalResult:
    per_group: dict[str, float] = field(default_factory=dict)
    zero_ideal_groups: list[str] = field(default_factory=list)
    mean: float = 0.0


def evaluate_run(run: Iterable[RunEntry], qrels: Qrels, k: int) -> EvalResult:
    """Per-group and mean NDCG@k; unjudged documents count as label 0 and
    zero-ideal groups are excluded from the mean but reported."""
    by_group: dict[str, list[RunEntry]] = {}
    for entry in run:
        by_group.setdefault(entry.group_key, []).append(entry)
    if not by_group:
        raise EmptyRun("run has no entries")

    result = EvalResult()
    scored_groups = []
    for group_key, entries in by_group.items():
        entries.sort(key=lambda e: e.rank)
        labels = [qrels.get(group_key, e.doc_id) for e in entries]
        if not any(label > 0 for label in labels):
            result.zero_ideal_groups.append(group_key)
            result.per_group[group_key] = 0.0
            continue
        value = ndcg_at_k(labels, k)
        result.per_group[group_key] = value
        scored_groups.append(value)
    result.mean = sum(scored_groups) / len(scored_groups) if scored_groups else 0.0
    return result


# ---------------------------------------------------------------------------
# TREC run files and qrels files
# ---------------------------------------------------------------------------

def write_run(entries: Iterable[RunEntry], sink: IO[str]) -> None:
    for entry in entries:
        sink.write(
            f"{entry.group_key} Q0 {entry.doc_id} {entry.rank} "
            f"{format_value(entry.score)} {entry.run_tag}\n"
        )


def read_run(source: Iterable[str]) -> list[RunEntry]:
    entries = []
    for line_no, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 6:
            raise MalformedLine(line_no, f"expected 6 run-file columns, got {len(parts)}")
        try:
            rank = int(parts[3])
            score = float(parts[4])
        except ValueError:
            raise MalformedLine(line_no, "bad rank or score") from None
        entries.append(RunEntry(group_key=parts[0], doc_id=parts[2], rank=rank,
                                score=score, run_tag=parts[5]))
    return entries


def read_qrels(source: Iterable[str]) -> Qrels:
    labels: dict[tuple[str, str], int] = {}
    for line_no, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise MalformedLine(line_no, f"expected 4 qrels columns, got {len(parts)}")
        try:
            label = int(parts[3])
        except ValueError:
            raise MalformedLine(line_no, f"bad label {parts[3]!r}") from None
        if label < 0:
            raise MalformedLine(line_no, "labels must be >= 0")
        labels[(parts[0], parts[2])] = label
    return Qrels(labels)


def write_qrels(qrels: Qrels, sink: IO[str]) -> None:
    for (group_key, doc_id), label in sorted(qrels.labels.items()):
        sink.write(f"{group_key} 0 {doc_id} {label}\n")
