import math

import numpy as np
import pandas as pd
import pytest

from trend_logic import (
    ShareSeries,
    TrendError,
    authors_per_paper,
    basic_statistics,
    country_ranking,
    growth,
    international_share,
    keyword_shares,
    pair_shares,
    persistent_top_keywords,
    publication_counts,
    tail_probability,
    top_keywords,
    top_pairs,
    trend_report,
    trends_from_counts,
    zscore,
    zscores,
)
from tests.conftest import corpus_of, keyword_corpus, record


def burst_decay_corpus():
    """Burst rises 1-2-5-10, decay falls 10-6-3-1, 22 other keywords stay level."""
    level = ["a", "b"] + [f"flat{j:02d}" for j in range(20)]
    windows = []
    for burst, decay in [(1, 10), (2, 6), (5, 3), (10, 1)]:
        articles = []
        for i in range(10):
            kws = list(level)
            if i < decay:
                kws.append("decay")
            if i < burst:
                kws.append("burst")
            articles.append(kws)
        windows.append(articles)
    return keyword_corpus(windows)


class TestBasicStatistics:
    def test_publication_counts(self, small_corpus):
        assert list(publication_counts(small_corpus)) == [2, 1, 0, 1]

    def test_publication_counts_match_year_scan(self):
        rng = np.random.default_rng(3)
        years = rng.integers(1993, 2013, size=1000)
        c = corpus_of([record(f"r{i}", int(y)) for i, y in enumerate(years)])
        expected = [int(((years >= a) & (years <= b)).sum()) for a, b in c.partition.windows]
        assert list(publication_counts(c)) == expected

    def test_authors_per_paper(self, small_corpus):
        means = authors_per_paper(small_corpus)
        assert means["1993-1997"] == 3.0
        assert math.isnan(means["2003-2007"])

    def test_authors_per_paper_matches_scan(self):
        rng = np.random.default_rng(5)
        records = [record(f"r{i}", 1994 + i % 19, authors=[f"a{j}" for j in range(rng.integers(1, 9))]) for i in range(500)]
        c = corpus_of(records)
        means = authors_per_paper(c)
        for w, label in enumerate(c.labels):
            sizes = [len(r.authors) for r in records if c.partition.window_of(r.year) == w]
            assert means[label] == pytest.approx(sum(sizes) / len(sizes), abs=1e-12)

    def test_international_share(self, small_corpus):
        shares = international_share(small_corpus)
        assert list(shares.fillna(-1)) == [0.5, 0.0, -1, 1.0]

    def test_duplicate_country_is_not_international(self):
        c = corpus_of([record("a", 1994, countries=["Australia", "Australia"])])
        assert international_share(c)["1993-1997"] == 0.0

    def test_country_ranking(self, small_corpus):
        ranking = country_ranking(small_corpus, k=10)
        assert ranking["all"] == [("China", 3), ("Australia", 2), ("India", 1)]
        assert ranking["1993-1997"] == [("Australia", 2), ("China", 1)]

    def test_country_ties_are_alphabetical(self):
        records = [record(f"u{i}", 1994, countries=["United States"]) for i in range(5)]
        records += [record(f"b{i}", 1994, countries=["Brazil"]) for i in range(5)]
        assert country_ranking(corpus_of(records), k=1)["all"] == [("Brazil", 5)]

    def test_country_ranking_k(self, small_corpus):
        with pytest.raises(TrendError):
            country_ranking(small_corpus, k=0)

    def test_top_keywords_and_persistence(self):
        c = keyword_corpus([[["x", "y"], ["x"]], [["x", "z"]], [["x"]], [["x", "y"]]])
        assert top_keywords(c, 1)["all"] == [("x", 5)]
        assert persistent_top_keywords(c, 1) == ["x"]

    def test_top_pairs(self, small_corpus):
        assert top_pairs(small_corpus, 1)["all"] == [(("insulin resistance", "obesity"), 3)]

    def test_bundle(self, small_corpus):
        tables = basic_statistics(small_corpus, k=5)
        assert set(tables) == {"overview", "countries", "keywords", "pairs", "persistent_keywords"}
        overview = tables["overview"]
        assert overview.loc["publications", "all"] == 4
        assert overview.loc["keyword_occurrences", "all"] == 10
        assert tables["keywords"].loc[1, "all"] == "obesity (4)"


class TestShares:
    def test_keyword_shares(self, small_corpus):
        s = keyword_shares(small_corpus, "diet")
        assert s.counts == (1, 0, 0, 1)
        assert s.shares == pytest.approx((0.2, 0.0, 0.0, 1 / 3))

    def test_unknown_keyword(self, small_corpus):
        with pytest.raises(TrendError):
            keyword_shares(small_corpus, "unknown")
        assert keyword_shares(small_corpus, "unknown", allow_zero=True).no_signal

    def test_pair_shares_use_article_counts(self, small_corpus):
        s = pair_shares(small_corpus, ("obesity", "insulin resistance"))
        assert s.subject == ("insulin resistance", "obesity")
        assert s.shares == pytest.approx((0.5, 1.0, 0.0, 1.0))

    def test_shares_match_counting_oracle(self):
        rng = np.random.default_rng(9)
        vocab = [f"kw{i}" for i in range(200)]
        per_window = [[list(rng.choice(vocab, size=5, replace=False)) for _ in range(30)] for _ in range(4)]
        c = keyword_corpus(per_window)
        for kw in vocab[:40]:
            expected = []
            for articles in per_window:
                hits = sum(kw in a for a in articles)
                expected.append(hits / sum(len(a) for a in articles))
            got = keyword_shares(c, kw, allow_zero=True).shares
            assert got == pytest.approx(tuple(expected))

    def test_invalid_series(self):
        with pytest.raises(TrendError):
            ShareSeries("x", (1, 2), (0.5, 1.5))


class TestGrowth:
    def test_rising_from_zero(self):
        assert growth([0.0000, 0.0037, 0.0166, 0.0263]) == pytest.approx(406.42, abs=2.0)

    def test_steady_rise(self):
        assert growth([0.0027, 0.0116, 0.0535, 0.0596]) == pytest.approx(701.42, abs=2.0)

    def test_constant(self):
        assert growth([0.2, 0.2, 0.2]) == 0.0

    def test_all_zero(self):
        s = ShareSeries("x", (0, 0, 0), (0.0, 0.0, 0.0))
        assert growth(s) == 0.0 and s.no_signal

    def test_zero_denominator_skipped(self):
        assert growth([0.2, 0.0, 0.0, 0.4]) == pytest.approx(-100.0)

    def test_scale(self):
        assert growth([1.0, 2.0], scale=1.0) == pytest.approx(1.0)

    def test_needs_two_windows(self):
        with pytest.raises(TrendError):
            growth([0.5])


class TestZAndP:
    def test_mean_scores_zero(self):
        assert zscore(5.0, [0.0, 5.0, 10.0]) == 0.0

    def test_two_point_population(self):
        assert zscore(10.0, [0.0, 10.0]) == pytest.approx(0.70710678, abs=1e-6)

    def test_zero_variance(self):
        assert math.isnan(zscore(1.0, [1.0, 1.0, 1.0]))

    def test_standardized_population(self):
        rng = np.random.default_rng(1)
        z = zscores(rng.normal(40, 25, size=300))
        assert z.mean() == pytest.approx(0.0, abs=1e-12)
        assert z.std(ddof=1) == pytest.approx(1.0)

    def test_tail(self):
        assert tail_probability(0.0) == 0.5
        assert tail_probability(2.326) == pytest.approx(0.01, abs=5e-4)
        assert tail_probability(-2.05) == pytest.approx(0.0202, abs=5e-4)
        assert math.isnan(tail_probability(math.nan))


class TestTrendReport:
    def test_two_subjects(self):
        matrix = pd.DataFrame([[2, 2], [1, 2]], index=["steady", "rising"], columns=[0, 1])
        rows = trends_from_counts(matrix, [10, 10])
        assert [r.subject for r in rows] == ["rising", "steady"]
        assert [r.growth for r in rows] == pytest.approx([100.0, 0.0])
        assert [r.z for r in rows] == pytest.approx([0.70710678, -0.70710678], abs=1e-6)

    def test_identical_growth(self):
        matrix = pd.DataFrame([[1, 1], [2, 2], [3, 3]], index=["a", "b", "c"], columns=[0, 1])
        rows = trends_from_counts(matrix, [6, 6])
        assert all(math.isnan(r.z) and math.isnan(r.p) for r in rows)

    def test_population_error(self, small_corpus):
        with pytest.raises(TrendError, match="population error"):
            trend_report(small_corpus, "keywords", min_total_count=4)

    def test_burst_first_decay_last(self):
        report = trend_report(burst_decay_corpus(), "keywords", min_total_count=1)
        assert report.increases(1)[0].subject == "burst"
        assert report.decreases(1)[0].subject == "decay"
        assert report.population == 24

    def test_burst_is_significant_decay_is_not(self):
        # sample sd over 24 growths: z(burst) about 4.30, z(decay) about -2.07
        report = trend_report(burst_decay_corpus(), "keywords", min_total_count=1)
        assert report.row("burst").z == pytest.approx(4.30, abs=0.01)
        assert report.row("burst").p < 0.01
        assert report.row("decay").p == pytest.approx(0.0193, abs=5e-4)
        assert report.row("decay").p > 0.01
        assert report.row("burst").significant(0.01) and not report.row("decay").significant(0.01)

    def test_three_keyword_table(self):
        c = keyword_corpus([[["x", "y", "z"]], [["x", "y"]], [["x"]], [["x", "z"]]])
        frame = trend_report(c, "keywords").frame()
        assert len(frame) == 3
        assert list(frame.columns[:2]) == ["subject", "1993-1997 (%)"]
        assert list(frame.columns[-5:]) == ["growth", "z", "p", "significant", "no_signal"]

    def test_count_basis_shows_counts(self):
        c = keyword_corpus([[["x", "y"]], [["x", "y"], ["x"]], [["x"]], [["y"]]])
        report = trend_report(c, "keywords", basis="count")
        frame = report.frame().set_index("subject")
        assert frame.loc["x", "1998-2002"] == 2
        assert report.row("x").growth == pytest.approx(100 * (1.0 - 0.5 - 1.0))

    def test_focus_keeps_population(self):
        report = trend_report(burst_decay_corpus(), "keywords", focus=["burst", "missing"])
        assert [r.subject for r in report.rows] == ["burst"]
        assert report.population == 24

    def test_pairs(self, small_corpus):
        report = trend_report(small_corpus, "pairs")
        assert report.scale == 1.0
        row = report.row(("insulin resistance", "obesity"))
        assert row.growth == pytest.approx(1.0 - 1.0 + 0.0)
        assert "keyword_1" in report.frame().columns

    def test_unknown_kind(self, small_corpus):
        with pytest.raises(TrendError):
            trend_report(small_corpus, "authors")
