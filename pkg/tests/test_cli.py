"""Command-line pipeline: end-to-end flows, determinism, exit codes."""

import pathlib

import pytest

from sessionrank.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"
SESSIONS = str(DATA / "sample_sessions.log")
CORPUS = str(DATA / "toy_corpus.tsv")
JUNK_CORPUS = str(DATA / "junk_corpus.tsv")


def run(*argv):
    return main(list(argv))


class TestFilterCommand:
    def test_junk_corpus_fully_removed(self, tmp_path, capsys):
        out = tmp_path / "kept.tsv"
        report = tmp_path / "report.txt"
        assert run("filter", "--corpus", JUNK_CORPUS, "--out-corpus", str(out),
                   "--report", str(report)) == EXIT_OK
        assert out.read_text(encoding="utf-8") == ""
        assert "kept 0 removed 15" in capsys.readouterr().out
        assert report.read_text(encoding="utf-8").startswith("#kept 0\n#removed 15\n")

    def test_clean_corpus_kept(self, tmp_path, capsys):
        out = tmp_path / "kept.tsv"
        assert run("filter", "--corpus", CORPUS, "--out-corpus", str(out)) == EXIT_OK
        assert len(out.read_text(encoding="utf-8").splitlines()) == 10
        assert "kept 10 removed 0" in capsys.readouterr().out

    def test_custom_rules_file(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text("minlen 0\nphrase 微信\n", encoding="utf-8")
        out = tmp_path / "kept.tsv"
        assert run("filter", "--corpus", CORPUS, "--rules", str(rules),
                   "--out-corpus", str(out)) == EXIT_OK
        kept = out.read_text(encoding="utf-8")
        assert "d5\t" not in kept
        assert len(kept.splitlines()) == 9


class TestStatsCommand:
    def test_writes_stats(self, tmp_path):
        out = tmp_path / "stats.tsv"
        assert run("stats", "--corpus", CORPUS, "--out", str(out)) == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("#corpus-stats n_docs=10 built_over=10 avgdl=")
        assert any(line.startswith("赛尔号\t") for line in lines)


class TestPipelineEndToEnd:
    def _features(self, tmp_path, pipeline="atm", extra=()):
        feats = tmp_path / "feats.txt"
        code = run("features", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--rules", "default", "--pipeline", pipeline,
                   "--out", str(feats), *extra)
        assert code == EXIT_OK
        return feats

    def test_atm_flow(self, tmp_path, capsys):
        feats = self._features(tmp_path)
        text = feats.read_text(encoding="utf-8")
        assert text.startswith("#schema atm\n")
        assert len(text.splitlines()) == 21  # header + 2 turns x 10 docs

        model = tmp_path / "model.txt"
        assert run("train", "--train", str(feats), "--out", str(model),
                   "--trees", "30") == EXIT_OK

        out = tmp_path / "run.trec"
        assert run("rerank", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--rules", "default", "--pipeline", "atm",
                   "--model", str(model), "--out", str(out)) == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 20
        ranks = {}
        for line in lines:
            group, _, _, rank, _, _ = line.split()
            ranks.setdefault(group, []).append(int(rank))
        assert all(r == list(range(1, 11)) for r in ranks.values())

        qrels = tmp_path / "qrels.txt"
        qrels.write_text("11:1 0 d209 1\n11:2 0 d209 1\n", encoding="utf-8")
        capsys.readouterr()
        assert run("eval", "--run", str(out), "--qrels", str(qrels), "--k", "10") == EXIT_OK
        printed = capsys.readouterr().out
        assert "mean ndcg@10 1.000000" in printed  # the clicked doc ranks first

    def test_baseline_rerank(self, tmp_path):
        out = tmp_path / "run.trec"
        assert run("rerank", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--rules", "default", "--pipeline", "atm",
                   "--baseline", "bm25", "--out", str(out)) == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        top3 = [line.split()[2] for line in lines[:3]]
        assert lines[0].split()[0] == "11:1"
        # the three docs containing the query token outrank everything else;
        # BM25 length normalization puts the shortest of them first
        assert set(top3) == {"d209", "d214", "d215"}
        assert top3[0] == "d215"

    def test_pmtm_requires_scores_or_override(self, tmp_path):
        feats = tmp_path / "feats.txt"
        assert run("features", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--pipeline", "pmtm", "--out", str(feats)) == EXIT_USAGE
        assert run("features", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--pipeline", "pmtm", "--allow-missing-scores",
                   "--out", str(feats)) == EXIT_OK
        assert feats.read_text(encoding="utf-8").startswith("#schema pmtm\n")

    def test_pmtm_with_external_scores(self, tmp_path):
        adhoc = tmp_path / "adhoc.tsv"
        sess = tmp_path / "sess.tsv"
        adhoc.write_text("11:1\td209\t0.9\n", encoding="utf-8")
        sess.write_text("11:1\td209\t0.8\n", encoding="utf-8")
        feats = self._features(tmp_path, pipeline="pmtm",
                               extra=("--adhoc-scores", str(adhoc),
                                      "--session-scores", str(sess)))
        line = next(l for l in feats.read_text(encoding="utf-8").splitlines()
                    if l.endswith("# d209") and l.split()[1] == "qid:11:1")
        fields = dict(part.split(":", 1) for part in line.split()[2:-2])
        assert fields["4"] == "0.9"
        assert fields["5"] == "0.8"

    def test_determinism(self, tmp_path):
        feats = self._features(tmp_path)
        models, runs = [], []
        for tag in ("a", "b"):
            model = tmp_path / f"model_{tag}.txt"
            out = tmp_path / f"run_{tag}.trec"
            assert run("train", "--train", str(feats), "--out", str(model),
                       "--trees", "20", "--seed", "42") == EXIT_OK
            assert run("rerank", "--sessions", SESSIONS, "--corpus", CORPUS,
                       "--rules", "default", "--pipeline", "atm",
                       "--model", str(model), "--out", str(out),
                       "--seed", "42") == EXIT_OK
            models.append(model.read_bytes())
            runs.append(out.read_bytes())
        assert models[0] == models[1]
        assert runs[0] == runs[1]

    def test_per_query_stats_scope(self, tmp_path):
        feats = self._features(tmp_path, extra=("--stats-scope", "per-query"))
        assert feats.read_text(encoding="utf-8").startswith("#schema atm\n")


class TestAsqCommand:
    def test_rows(self, tmp_path):
        out = tmp_path / "asq.tsv"
        assert run("asq", "--sessions", SESSIONS, "--out", str(out)) == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        key, asq = lines[0].split("\t")
        assert key == "11:1"
        assert asq == "[CLS]4399赛尔号[SEP][SEP]"
        assert lines[1].split("\t")[0] == "11:2"


class TestConfigPrecedence:
    def test_config_supplies_values_flags_override(self, tmp_path):
        config = tmp_path / "conf.txt"
        config.write_text("trees = 5\nshrinkage = 0.3\n", encoding="utf-8")
        feats = tmp_path / "feats.txt"
        run("features", "--sessions", SESSIONS, "--corpus", CORPUS,
            "--out", str(feats))
        model = tmp_path / "model.txt"
        assert run("train", "--train", str(feats), "--out", str(model),
                   "--config", str(config)) == EXIT_OK
        header = model.read_text(encoding="utf-8").splitlines()[0]
        assert "trees=5" in header and "shrinkage=0.3" in header

        assert run("train", "--train", str(feats), "--out", str(model),
                   "--config", str(config), "--trees", "3") == EXIT_OK
        header = model.read_text(encoding="utf-8").splitlines()[0]
        assert "trees=3" in header and "shrinkage=0.3" in header


class TestExitCodes:
    def test_usage_error_missing_option(self, capsys):
        assert run("train", "--out", "x.txt") == EXIT_USAGE
        assert "usage error" in capsys.readouterr().err

    def test_usage_error_unknown_flag(self):
        assert run("train", "--bogus", "1") == EXIT_USAGE

    def test_data_error_missing_file(self, tmp_path, capsys):
        assert run("features", "--sessions", str(tmp_path / "nope.log"),
                   "--corpus", CORPUS, "--out", str(tmp_path / "f.txt")) == EXIT_DATA
        assert "data error" in capsys.readouterr().err

    def test_data_error_malformed_sessions(self, tmp_path, capsys):
        bad = tmp_path / "bad.log"
        bad.write_text("SessionID 1\n-----\nq q1 notatime\n", encoding="utf-8")
        assert run("features", "--sessions", str(bad), "--corpus", CORPUS,
                   "--out", str(tmp_path / "f.txt")) == EXIT_DATA
        err = capsys.readouterr().err
        assert "line 3" in err

    def test_rerank_needs_model_xor_baseline(self, tmp_path):
        assert run("rerank", "--sessions", SESSIONS, "--corpus", CORPUS,
                   "--out", str(tmp_path / "r.trec")) == EXIT_USAGE
