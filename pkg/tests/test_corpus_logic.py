import json

import pytest

from corpus_logic import ArticleRecord, CorpusError, PeriodPartition, build_corpus, load_corpus, partition_periods, save_corpus
from schema import FLAG_NO_KEYWORDS
from tests.conftest import WINDOWS, corpus_of, record


class TestPartitionPeriods:
    def test_four_five_year_windows(self):
        p = partition_periods(1993, 2012, 5)
        assert p.windows == ((1993, 1997), (1998, 2002), (2003, 2007), (2008, 2012))
        assert p.labels == ("1993-1997", "1998-2002", "2003-2007", "2008-2012")

    def test_two_year_windows(self):
        assert len(partition_periods(1990, 1999, 2)) == 5

    def test_single_window_rejected(self):
        with pytest.raises(CorpusError, match="at least 2 windows"):
            partition_periods(2000, 2000, 1)

    def test_uneven_range_points_to_window_list(self):
        with pytest.raises(CorpusError, match="explicit window list"):
            partition_periods(1993, 2011, 5)

    def test_explicit_windows_may_have_gaps(self):
        p = PeriodPartition.from_windows([(1990, 1991), (1995, 1999)], ["early", "late"])
        assert p.window_of(1993) is None
        assert p.window_of(1996) == 1

    def test_overlapping_windows_rejected(self):
        with pytest.raises(CorpusError, match="disjoint"):
            PeriodPartition.from_windows([(1990, 1995), (1995, 1999)])

    def test_reserved_label_rejected(self):
        with pytest.raises(CorpusError):
            PeriodPartition.from_windows([(1990, 1991), (1992, 1993)], ["a", "all"])


class TestArticleRecord:
    def test_empty_title_rejected(self):
        with pytest.raises(CorpusError, match="title"):
            record("x", 2000, title=" ")

    def test_duplicate_keywords_rejected(self):
        with pytest.raises(CorpusError, match="duplicate keywords"):
            record("x", 2000, ["obesity", "obesity"])

    def test_keywordless_record_is_flagged(self):
        r = record("x", 2000, [])
        assert r.flags == (FLAG_NO_KEYWORDS,)
        assert not r.complete

    def test_countries_are_distinct_and_known(self):
        r = ArticleRecord(
            id="x",
            title="t",
            year=2000,
            authors=("A",),
            affiliations=(("u1, Australia", "Australia"), ("u2, Australia", "Australia"), ("lab", None)),
            keywords=("k",),
        )
        assert r.countries == ("Australia",)


class TestBuildCorpus:
    def test_one_record_per_occupied_window(self):
        c = corpus_of([record("a", 1994), record("b", 2000), record("c", 2010)])
        assert c.article_counts == (1, 1, 0, 1)

    def test_record_after_last_window_is_excluded(self):
        c = corpus_of([record("a", 1994), record("b", 2013)])
        assert c.provenance.excluded == 1
        assert [r.id for r in c.records] == ["a"]

    def test_empty_corpus(self):
        with pytest.raises(CorpusError, match="empty corpus"):
            corpus_of([record("a", 2013)])

    def test_duplicate_ids_are_named(self):
        with pytest.raises(CorpusError, match="duplicate record ids: a"):
            corpus_of([record("a", 1994), record("a", 1995)])

    def test_keyword_totals(self, small_corpus):
        assert small_corpus.keyword_totals == (5, 2, 0, 3)
        assert sum(small_corpus.keyword_totals) == sum(len(r.keywords) for r in small_corpus.records)

    def test_mean_keywords_per_record(self):
        records = [record(f"r{i}", 1994, [f"k{j}" for j in range(5 if i % 10 else 4)]) for i in range(100)]
        c = corpus_of(records)
        assert c.mean_keywords_per_record == pytest.approx(4.9)

    def test_flagged_records_stored_but_not_analysed(self):
        c = corpus_of([record("a", 1994), record("b", 1995, [])])
        assert len(c.records) == 2
        assert [r.id for r in c.analysed] == ["a"]
        assert c.provenance.flagged == 1
        assert c.keyword_totals == (1, 0, 0, 0)

    def test_accounting_identity(self):
        c = build_corpus(
            [record("a", 1994), record("b", 2020)],
            PeriodPartition.from_windows(WINDOWS),
            rejected={"missing-title": 2},
            duplicates=1,
        )
        p = c.provenance
        assert p.input_count - p.rejected_total - p.duplicates - p.excluded == len(c.records)

    def test_window_lookup_by_label_or_index(self, small_corpus):
        assert small_corpus.window_index("1998-2002") == 1
        assert small_corpus.window_index(3) == 3
        with pytest.raises(CorpusError, match="unknown window"):
            small_corpus.window_index("1900-1901")


class TestPersistence:
    def test_round_trip(self, small_corpus, tmp_path):
        path = save_corpus(small_corpus, tmp_path / "corpus.jsonl")
        assert load_corpus(path) == small_corpus

    def test_round_trip_keeps_flags_and_provenance(self, tmp_path):
        c = corpus_of([record("a", 1994, doi="10.1/x"), record("b", 1995, []), record("c", 2020)])
        assert load_corpus(save_corpus(c, tmp_path / "c.jsonl")) == c

    def test_save_is_deterministic(self, small_corpus, tmp_path):
        a = save_corpus(small_corpus, tmp_path / "a.jsonl").read_bytes()
        b = save_corpus(small_corpus, tmp_path / "b.jsonl").read_bytes()
        assert a == b

    def test_corrupted_line_cites_line_number(self, small_corpus, tmp_path):
        path = save_corpus(small_corpus, tmp_path / "corpus.jsonl")
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[2] = lines[2][: len(lines[2]) // 2]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(CorpusError, match=":3: malformed record line"):
            load_corpus(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(CorpusError, match="empty corpus"):
            load_corpus(path)

    def test_schema_version_mismatch(self, small_corpus, tmp_path):
        path = save_corpus(small_corpus, tmp_path / "corpus.jsonl")
        lines = path.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        header["schema_version"] = 99
        lines[0] = json.dumps(header)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="schema version 99"):
            load_corpus(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            load_corpus(tmp_path / "nope.jsonl")
