"""Domain types, tokenization, and the session-log / corpus parsers."""

import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sessionrank.data import (
    Corpus,
    Document,
    Impression,
    QueryTurn,
    load_corpus,
    load_corpus_tsv,
    parse_session_log,
    serialize_session_log,
    tokenize,
    turn_group_key,
    validate_sessions,
)
from sessionrank.errors import (
    DuplicateDocId,
    DuplicateSessionId,
    MalformedLine,
    UnreadableSource,
)


class TestTokenize:
    def test_whitespace_split(self):
        assert tokenize("404 Not Found nginx") == ["404", "Not", "Found", "nginx"]

    def test_empty(self):
        assert tokenize("") == []

    def test_whitespace_collapse(self):
        assert tokenize("  a   b ") == ["a", "b"]

    def test_mixed_whitespace(self):
        assert tokenize("a\tb\n c") == ["a", "b", "c"]

    @given(st.text())
    def test_idempotent_on_joined_output(self, raw):
        once = tokenize(raw)
        assert tokenize(" ".join(once)) == once


class TestDomainTypes:
    def test_document_lengths(self):
        doc = Document.from_raw("d5", "微信 是 一个 生活 方式")
        assert doc.token_length == 5
        assert doc.char_length == len("微信 是 一个 生活 方式")

    def test_unclicked_cannot_carry_click_time(self):
        with pytest.raises(ValueError):
            Impression(rank=1, url="u", doc_id="d1", title="t", clicked=False, click_time=3.0)

    def test_turn_requires_contiguous_ranks(self):
        imps = [
            Impression(rank=1, url="u", doc_id="d1", title="t", clicked=False),
            Impression(rank=3, url="u", doc_id="d2", title="t", clicked=False),
        ]
        with pytest.raises(ValueError):
            QueryTurn(query=_query("q1", "a"), issue_time=0.0, impressions=tuple(imps))

    def test_corpus_rejects_duplicates(self):
        corpus = Corpus([Document.from_raw("d5", "a")])
        with pytest.raises(DuplicateDocId):
            corpus.add(Document.from_raw("d5", "b"))


def _query(qid, text):
    from sessionrank.data import Query

    return Query.from_raw(qid, text)


class TestParseSessionLog:
    def test_sample_log_structure(self, sample_log_text):
        sessions = parse_session_log(sample_log_text)
        assert len(sessions) == 1
        session = sessions[0]
        assert session.session_id == "11"
        assert len(session.turns) == 2
        assert all(len(t.impressions) == 10 for t in session.turns)

    def test_sample_turn_header(self, sample_log_text):
        turn = parse_session_log(sample_log_text)[0].turns[0]
        assert turn.query.qid == "q20"
        assert turn.query.text == ("4399赛尔号",)
        assert turn.issue_time == 1427845508.16

    def test_sample_clicked_impression(self, sample_log_text):
        turn = parse_session_log(sample_log_text)[0].turns[0]
        first = turn.impressions[0]
        assert first.rank == 1
        assert first.doc_id == "d209"
        assert first.clicked is True
        assert first.click_time == 1427845518.218

    def test_sample_unclicked_has_no_click_time(self, sample_log_text):
        turn = parse_session_log(sample_log_text)[0].turns[0]
        assert all(
            imp.click_time is None for imp in turn.impressions if not imp.clicked
        )

    def test_title_with_spaces(self):
        text = (
            "SessionID 1\n-----\nmy query terms q1 100.5\n"
            "1 http://a d1 a title with many words 1 101.0\n"
        )
        session = parse_session_log(text)[0]
        turn = session.turns[0]
        assert turn.query.text == ("my", "query", "terms")
        assert turn.impressions[0].title == "a title with many words"

    def test_empty_title(self):
        text = "SessionID 1\n-----\nq q1 1.0\n1 http://a d1 0 -1\n"
        imp = parse_session_log(text)[0].turns[0].impressions[0]
        assert imp.title == ""
        assert imp.doc_id == "d1"

    def test_multiple_sessions(self, sample_log_text):
        two = sample_log_text + sample_log_text.replace("SessionID 11", "SessionID 12")
        sessions = parse_session_log(two)
        assert [s.session_id for s in sessions] == ["11", "12"]

    def test_duplicate_session_id(self, sample_log_text):
        with pytest.raises(DuplicateSessionId):
            parse_session_log(sample_log_text + sample_log_text)

    @pytest.mark.parametrize(
        "bad_line",
        [
            "1 http://a d1 title 2 5.0",      # clicked flag not 0/1
            "x http://a d1 title 0 -1",       # bad rank
            "1 http://a 0 -1",                # too few fields
            "1 http://a d1 title 0 1234.5",   # unclicked with click_time
        ],
    )
    def test_malformed_impressions(self, bad_line):
        text = f"SessionID 1\n-----\nq q1 1.0\n{bad_line}\n"
        with pytest.raises(MalformedLine) as exc:
            parse_session_log(text)
        assert exc.value.line_no == 4

    def test_noncontiguous_ranks_rejected(self):
        text = (
            "SessionID 1\n-----\nq q1 1.0\n"
            "1 http://a d1 t 0 -1\n3 http://b d2 t 0 -1\n"
        )
        with pytest.raises(MalformedLine):
            parse_session_log(text)

    def test_separator_before_header(self):
        with pytest.raises(MalformedLine):
            parse_session_log("-----\nq q1 1.0\n")

    def test_bad_turn_header(self):
        with pytest.raises(MalformedLine):
            parse_session_log("SessionID 1\n-----\nonlyqid 1.0\n")

    def test_roundtrip(self, sample_log_text):
        sessions = parse_session_log(sample_log_text)
        rendered = serialize_session_log(sessions)
        assert parse_session_log(rendered) == sessions
        # whitespace-normalized textual identity
        norm = lambda t: [" ".join(l.split()) for l in t.strip().splitlines() if l.strip()]
        assert norm(rendered) == norm(sample_log_text)


class TestLoadCorpus:
    def test_tsv(self):
        corpus = load_corpus_tsv(["d5\t微信 是 一个 生活 方式\n", "d6\tx y\n"])
        assert len(corpus) == 2
        assert corpus["d5"].token_length == 5

    def test_tsv_duplicate(self):
        with pytest.raises(DuplicateDocId):
            load_corpus_tsv(["d5\ta\n", "d5\tb\n"])

    def test_tsv_missing_tab(self):
        with pytest.raises(MalformedLine):
            load_corpus_tsv(["d5 no tab here\n"])

    def test_directory(self, tmp_path):
        (tmp_path / "d209.txt").write_text("赛尔号 攻略", encoding="utf-8")
        (tmp_path / "d210.txt").write_text("a b c\n", encoding="utf-8")
        corpus = load_corpus(tmp_path)
        assert corpus["d209"].token_length == 2
        assert corpus["d210"].raw_text == "a b c"

    def test_missing_source(self, tmp_path):
        with pytest.raises(UnreadableSource):
            load_corpus(tmp_path / "nope")

    def test_stream(self, toy_corpus_path):
        with open(toy_corpus_path, encoding="utf-8") as fh:
            corpus = load_corpus(fh)
        assert len(corpus) == 10


class TestValidate:
    def test_missing_docs_reported(self, sample_log_text):
        sessions = parse_session_log(sample_log_text)
        corpus = load_corpus_tsv(["d209\tsome text\n"])
        report = validate_sessions(sessions, corpus)
        assert not report.ok
        assert ("11:1", "d210") in report.missing_doc_ids
        assert all(doc != "d209" for _, doc in report.missing_doc_ids)

    def test_out_of_order_turns_warn(self, sample_log_text):
        sessions = parse_session_log(sample_log_text)
        flipped = sessions[0].turns[::-1]
        from sessionrank.data import Session

        report = validate_sessions(
            [Session(session_id="11", turns=tuple(flipped))],
            load_corpus_tsv([f"d{i}\tx\n" for i in [209, 210, 211, 212, 213, 214, 5, 215, 216, 217]]),
        )
        assert report.unordered_sessions == ["11"]

    def test_group_key(self, sample_log_text):
        session = parse_session_log(sample_log_text)[0]
        assert turn_group_key(session, 0) == "11:1"
        assert turn_group_key(session, 1) == "11:2"


@given(
    st.lists(
        st.tuples(
            st.integers(0, 1),
            st.floats(min_value=0, max_value=1e9, allow_nan=False),
        ),
        min_size=1,
        max_size=10,
    )
)
def test_roundtrip_property(imp_specs):
    """Sessions built from simple parts survive serialize -> parse."""
    from sessionrank.data import Query, Session

    imps = tuple(
        Impression(
            rank=i + 1,
            url=f"http://x/{i}",
            doc_id=f"d{i}",
            title=f"title {i}",
            clicked=bool(c),
            click_time=t if c else None,
        )
        for i, (c, t) in enumerate(imp_specs)
    )
    session = Session(
        session_id="s1",
        turns=(QueryTurn(query=Query.from_raw("q1", "a b"), issue_time=5.0, impressions=imps),),
    )
    assert parse_session_log(serialize_session_log([session])) == [session]
