"""Meaningless-document filtering: rules, ordering, partition properties."""

import io

import pytest

from sessionrank.data import Corpus, Document, load_corpus
from sessionrank.errors import MalformedLine
from sessionrank.filtering import (
    FilterRules,
    filter_corpus,
    is_filtered,
    load_rules,
    parse_rules,
    write_report,
)


def doc(doc_id, raw):
    return Document.from_raw(doc_id, raw)


class TestIsFiltered:
    def test_soft_404_phrase(self):
        matched = is_filtered(doc("d1", "404 Not Found 404 Not Found nginx"), FilterRules())
        assert matched is not None
        assert matched.kind == "phrase"
        assert matched.detail == "404 Not Found"

    def test_unk_stub_exact(self):
        matched = is_filtered(doc("d1", "<unk>"), FilterRules())
        assert matched.kind == "exact"
        assert matched.detail == "<unk>"

    def test_clean_doc_kept(self):
        clean = doc("d1", " ".join(f"w{i}" for i in range(50)))
        assert is_filtered(clean, FilterRules()) is None

    def test_exact_checked_before_phrase(self):
        rules = FilterRules(
            min_token_length=0,
            banned_exact=frozenset({"404 Not Found"}),
            banned_phrases=("404",),
        )
        assert is_filtered(doc("d1", "404 Not Found"), rules).kind == "exact"

    def test_phrase_checked_before_length(self):
        # three tokens, below default minlen, but the phrase fires first
        assert is_filtered(doc("d1", "404 Not Found"), FilterRules()).kind == "phrase"

    def test_short_doc_filtered_by_length(self):
        assert is_filtered(doc("d1", "short clean text"), FilterRules()).kind == "minlen"

    def test_exact_matches_after_trimming(self):
        assert is_filtered(doc("d1", "  <unk>  "), FilterRules()).kind == "exact"

    def test_case_sensitive_phrases(self):
        rules = FilterRules(min_token_length=0, banned_exact=frozenset(),
                            banned_phrases=("Page Not Found",))
        assert is_filtered(doc("d1", "page not found but lowercase"), rules) is None


class TestFilterCorpus:
    def test_junk_corpus_all_removed(self, junk_corpus_path):
        corpus = load_corpus(junk_corpus_path)
        kept, report = filter_corpus(corpus, FilterRules())
        assert report.removed == len(corpus)
        assert report.kept == 0
        assert len(kept) == 0

    def test_clean_corpus_fully_kept(self, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        kept, report = filter_corpus(corpus, FilterRules())
        assert report.kept == 10
        assert report.removed == 0

    def test_empty_corpus(self):
        kept, report = filter_corpus(Corpus(), FilterRules())
        assert (report.kept, report.removed) == (0, 0)
        assert len(kept) == 0

    def test_partition(self, junk_corpus_path, toy_corpus_path):
        corpus = load_corpus(junk_corpus_path)
        for d in load_corpus(toy_corpus_path):
            corpus.add(d)
        kept, report = filter_corpus(corpus, FilterRules())
        removed_ids = {doc_id for doc_id, _ in report.removals}
        kept_ids = set(kept.doc_ids())
        assert kept_ids | removed_ids == set(corpus.doc_ids())
        assert not (kept_ids & removed_ids)
        assert report.kept + report.removed == len(corpus)

    def test_monotone_in_rules(self, toy_corpus_path):
        corpus = load_corpus(toy_corpus_path)
        base = FilterRules(min_token_length=0, banned_exact=frozenset(), banned_phrases=())
        kept_base, _ = filter_corpus(corpus, base)
        stricter = FilterRules(min_token_length=0, banned_exact=frozenset(),
                               banned_phrases=("赛尔号",))
        kept_strict, _ = filter_corpus(corpus, stricter)
        assert set(kept_strict.doc_ids()) <= set(kept_base.doc_ids())

    def test_deterministic_report(self, junk_corpus_path):
        corpus = load_corpus(junk_corpus_path)
        _, report_a = filter_corpus(corpus, FilterRules())
        _, report_b = filter_corpus(corpus, FilterRules())
        assert report_a.removals == report_b.removals
        assert [d for d, _ in report_a.removals] == sorted(d for d, _ in report_a.removals)


class TestRulesFile:
    def test_parse(self):
        rules = parse_rules([
            "# soft-404 rules\n",
            "phrase 404 Not Found\n",
            "exact <unk>\n",
            "minlen 7\n",
            "\n",
        ])
        assert rules.banned_phrases == ("404 Not Found",)
        assert rules.banned_exact == frozenset({"<unk>"})
        assert rules.min_token_length == 7

    def test_unknown_directive(self):
        with pytest.raises(MalformedLine):
            parse_rules(["bogus thing\n"])

    def test_bad_minlen(self):
        with pytest.raises(MalformedLine):
            parse_rules(["minlen many\n"])

    def test_empty_phrase(self):
        with pytest.raises(MalformedLine):
            parse_rules(["phrase\n"])

    def test_load_and_apply(self, tmp_path):
        rules_file = tmp_path / "rules.txt"
        rules_file.write_text("exact junk\nminlen 0\n", encoding="utf-8")
        rules = load_rules(rules_file)
        assert is_filtered(doc("d1", "junk"), rules).kind == "exact"
        assert is_filtered(doc("d1", "not junk at all"), rules) is None

    def test_report_output(self):
        corpus = Corpus([doc("d1", "<unk>"), doc("d2", "a perfectly fine document here")])
        _, report = filter_corpus(corpus, FilterRules())
        sink = io.StringIO()
        write_report(report, sink)
        lines = sink.getvalue().splitlines()
        assert lines[0] == "#kept 1"
        assert lines[1] == "#removed 1"
        assert lines[2] == "d1\texact\t<unk>"
