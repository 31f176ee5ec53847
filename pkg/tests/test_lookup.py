import io

import pytest
from rich.console import Console

from lookup import author_summary, keyword_summary, search


class TestKeywordSummary:
    def test_series_and_growth(self, small_corpus):
        summary = keyword_summary(small_corpus, "  Obesity ")
        assert summary.keyword == "obesity"
        assert summary.series.counts == (2, 1, 0, 1)
        assert summary.growth == pytest.approx(-75.0)

    def test_partners(self, small_corpus):
        summary = keyword_summary(small_corpus, "obesity")
        assert summary.partners == [("insulin resistance", 3), ("diet", 2), ("insulin", 1)]
        assert summary.derived == []

    def test_derived(self, small_corpus):
        assert keyword_summary(small_corpus, "insulin").derived == [("insulin resistance", 3)]

    def test_unknown(self, small_corpus):
        assert keyword_summary(small_corpus, "vitamin d") is None


class TestAuthorSummary:
    def test_papers_and_keywords(self, small_corpus):
        summary = author_summary(small_corpus, "b")
        assert summary.authors == ["B"]
        assert list(summary.papers) == [2, 0, 0, 0]
        assert summary.keywords == [("obesity", 2), ("diet", 1), ("insulin", 1), ("insulin resistance", 1)]

    def test_unknown(self, small_corpus):
        assert author_summary(small_corpus, "zz") is None


def test_search_session(small_corpus):
    out = io.StringIO()
    answers = iter(["1", "obesity", "2", "d", "9", "3"])
    search(small_corpus, console=Console(file=out, width=120), ask=lambda prompt: next(answers))
    text = out.getvalue()
    assert "obesity (growth -75.00%)" in text
    assert "Top partners: insulin resistance (3), diet (2), insulin (1)" in text
    assert "Matching authors: D" in text
