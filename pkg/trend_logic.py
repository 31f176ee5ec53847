"""Per-window basic statistics and the keyword trend statistics.

growth   sum over consecutive windows of (f[i+1] - f[i]) / f[i], times a scale
         (100 for percent); a window with f[i] = 0 contributes nothing
z        (x - mean) / s over the eligible population, s the sample (n - 1) sd
p        one-sided standard normal tail in the direction of z
"""

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd
from scipy.stats import norm

from corpus_logic import Corpus
from schema import ALL_LABEL, DataError

log = logging.getLogger(__name__)

Subject = str | tuple[str, ...]

BASES = ("share", "count")
KINDS = ("keywords", "pairs")


class TrendError(DataError):
    pass


def subject_label(subject: Subject) -> str:
    return subject if isinstance(subject, str) else " | ".join(subject)


# --- BASIC STATISTICS ---
def _by_window(corpus: Corpus, values: pd.Series, overall: float | None = None, name: str | None = None) -> pd.Series:
    series = values.reindex(range(corpus.n_windows))
    series.index = list(corpus.labels)
    if overall is not None:
        series[ALL_LABEL] = overall
    series.name = name
    return series


def publication_counts(corpus: Corpus) -> pd.Series:
    return pd.Series(corpus.article_counts, index=list(corpus.labels), name="publications", dtype="int64")


def authors_per_paper(corpus: Corpus, with_overall: bool = False) -> pd.Series:
    """Mean author count per window; NaN for an empty window."""
    frame = corpus.frame
    means = frame.groupby("window")["n_authors"].mean()
    return _by_window(corpus, means, frame["n_authors"].mean() if with_overall else None, "authors_per_paper")


def international_share(corpus: Corpus, with_overall: bool = False) -> pd.Series:
    """Fraction of articles with two or more distinct resolved countries."""
    frame = corpus.frame
    international = frame["n_countries"] >= 2
    shares = international.groupby(frame["window"]).mean()
    return _by_window(corpus, shares, international.mean() if with_overall else None, "international_share")


def _ranked(counts: pd.Series, k: int | None) -> list[tuple[Any, int]]:
    items = sorted(((key, int(n)) for key, n in counts.items() if n > 0), key=lambda kv: (-kv[1], kv[0]))
    return items if k is None else items[:k]


def country_ranking(corpus: Corpus, k: int = 20) -> dict[str, list[tuple[str, int]]]:
    """Articles per country (each distinct country of an article counts once), per window and overall."""
    if k < 1:
        raise TrendError("k must be at least 1")
    frame = corpus.country_frame
    ranking = {}
    for w, label in enumerate(corpus.labels):
        ranking[label] = _ranked(frame.loc[frame["window"] == w, "country"].value_counts(), k)
    ranking[ALL_LABEL] = _ranked(frame["country"].value_counts(), k)
    return ranking


def top_keywords(corpus: Corpus, k: int = 20) -> dict[str, list[tuple[str, int]]]:
    matrix = corpus.keyword_counts
    ranking = {label: _ranked(matrix[w], k) for w, label in enumerate(corpus.labels)}
    ranking[ALL_LABEL] = _ranked(matrix.sum(axis=1), k)
    return ranking


def persistent_top_keywords(corpus: Corpus, k: int = 20) -> list[str]:
    """Keywords in the overall top-k that are also in the top-k of every window."""
    ranking = top_keywords(corpus, k)
    per_window = [{kw for kw, _ in ranking[label]} for label in corpus.labels]
    return [kw for kw, _ in ranking[ALL_LABEL] if all(kw in top for top in per_window)]


def top_pairs(corpus: Corpus, k: int = 20) -> dict[str, list[tuple[tuple[str, str], int]]]:
    matrix = corpus.pair_counts
    ranking = {label: _ranked(matrix[w], k) for w, label in enumerate(corpus.labels)}
    ranking[ALL_LABEL] = _ranked(matrix.sum(axis=1), k)
    return ranking


def basic_statistics(corpus: Corpus, k: int = 20) -> dict[str, pd.DataFrame]:
    """Publication, author, collaboration, keyword and country overview tables."""
    columns = list(corpus.labels) + [ALL_LABEL]
    publications = publication_counts(corpus)
    publications[ALL_LABEL] = publications.sum()
    occurrences = pd.Series(list(corpus.keyword_totals) + [sum(corpus.keyword_totals)], index=columns)
    distinct_countries = corpus.country_frame.groupby("window")["country"].nunique()
    distinct_countries = _by_window(corpus, distinct_countries, corpus.country_frame["country"].nunique())

    overview = pd.DataFrame(
        {
            "publications": publications,
            "authors_per_paper": authors_per_paper(corpus, with_overall=True),
            "international_share": international_share(corpus, with_overall=True),
            "keyword_occurrences": occurrences,
            "keywords_per_paper": occurrences / publications.replace(0, np.nan),
            "countries": distinct_countries.fillna(0).astype("int64"),
        }
    ).T[columns]
    overview.index.name = "statistic"

    def ranking_table(ranking: dict[str, list[tuple[Any, int]]]) -> pd.DataFrame:
        depth = max((len(v) for v in ranking.values()), default=0)
        table = {
            label: [f"{subject_label(s)} ({n})" for s, n in ranking[label]] + [""] * (depth - len(ranking[label]))
            for label in [ALL_LABEL] + list(corpus.labels)
        }
        frame = pd.DataFrame(table, index=pd.RangeIndex(1, depth + 1, name="rank"))
        return frame

    return {
        "overview": overview,
        "countries": ranking_table(country_ranking(corpus, k)),
        "keywords": ranking_table(top_keywords(corpus, k)),
        "pairs": ranking_table(top_pairs(corpus, k)),
        "persistent_keywords": pd.DataFrame({"keyword": persistent_top_keywords(corpus, k)}),
    }


# --- SHARE SERIES ---
@dataclass(frozen=True)
class ShareSeries:
    subject: Subject
    counts: tuple[int, ...]
    shares: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "shares", tuple(float(s) for s in self.shares))
        if len(self.counts) != len(self.shares):
            raise TrendError("counts and shares must have one value per window")
        if any(c < 0 for c in self.counts) or any(not 0.0 <= s <= 1.0 for s in self.shares):
            raise TrendError(f"invalid share series for {subject_label(self.subject)!r}")

    @property
    def percent(self) -> tuple[float, ...]:
        return tuple(s * 100.0 for s in self.shares)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def no_signal(self) -> bool:
        return not any(self.shares)


def _shares(counts: Sequence[int], denominators: Sequence[int]) -> tuple[float, ...]:
    return tuple(c / d if d else 0.0 for c, d in zip(counts, denominators))


def keyword_shares(corpus: Corpus, subject: str, allow_zero: bool = False) -> ShareSeries:
    """Per-window article count of ``subject`` over the window's keyword occurrences."""
    matrix = corpus.keyword_counts
    if subject in matrix.index:
        counts = tuple(int(c) for c in matrix.loc[subject])
    elif allow_zero:
        counts = (0,) * corpus.n_windows
    else:
        raise TrendError(f"keyword {subject!r} does not occur in the corpus")
    return ShareSeries(subject, counts, _shares(counts, corpus.keyword_totals))


def pair_shares(corpus: Corpus, pair: Sequence[str], allow_zero: bool = False) -> ShareSeries:
    """Per-window count of articles holding both keywords over the window's article count."""
    a, b = sorted(pair)
    matrix = corpus.pair_counts
    if (a, b) in matrix.index:
        counts = tuple(int(c) for c in matrix.loc[(a, b)])
    elif allow_zero:
        counts = (0,) * corpus.n_windows
    else:
        raise TrendError(f"pair {a!r} / {b!r} never co-occurs in the corpus")
    return ShareSeries((a, b), counts, _shares(counts, corpus.article_counts))


# --- GROWTH, Z, P ---
def growth(series: ShareSeries | Sequence[float], scale: float = 100.0) -> float:
    """Sum of relative changes between consecutive windows; zero denominators are skipped."""
    values = series.shares if isinstance(series, ShareSeries) else tuple(float(v) for v in series)
    if len(values) < 2:
        raise TrendError("growth needs at least 2 windows")
    terms = [(b - a) / a for a, b in itertools.pairwise(values) if a > 0]
    return math.fsum(terms) * scale


def zscore(x: float, population: Sequence[float]) -> float:
    """Standardized score against the sample sd of ``population``; NaN when the sd is zero."""
    pop = np.asarray(population, dtype=float)
    if pop.size < 2:
        raise TrendError("z-score needs a population of at least 2 values")
    sd = pop.std(ddof=1)
    if not sd > 0:
        return math.nan
    return float((x - pop.mean()) / sd)


def zscores(population: Sequence[float]) -> np.ndarray:
    pop = np.asarray(population, dtype=float)
    if pop.size < 2:
        raise TrendError("z-score needs a population of at least 2 values")
    sd = pop.std(ddof=1)
    if not sd > 0:
        return np.full(pop.shape, np.nan)
    return (pop - pop.mean()) / sd


def tail_probability(z: float) -> float:
    """One-sided normal tail: 1 - Phi(z) for z >= 0, Phi(z) for z < 0."""
    if math.isnan(z):
        return math.nan
    return float(norm.sf(abs(z)))


# --- TREND REPORTS ---
@dataclass(frozen=True)
class TrendRow:
    subject: Subject
    counts: tuple[int, ...]
    shares: tuple[float, ...]
    growth: float
    z: float
    p: float
    no_signal: bool = False

    def significant(self, alpha: float) -> bool:
        return not math.isnan(self.p) and self.p < alpha


@dataclass(frozen=True)
class TrendReport:
    kind: str
    labels: tuple[str, ...]
    rows: tuple[TrendRow, ...]
    population: int
    min_total_count: int
    basis: str
    scale: float
    alpha: float

    def increases(self, n: int | None = None) -> list[TrendRow]:
        return list(self.rows[:n])

    def decreases(self, n: int | None = None) -> list[TrendRow]:
        rows = sorted(self.rows, key=lambda r: (r.growth, r.subject))
        return rows[:n]

    def row(self, subject: Subject) -> TrendRow:
        for r in self.rows:
            if r.subject == subject:
                return r
        raise KeyError(subject)

    def metadata(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "population": self.population,
            "min_total_count": self.min_total_count,
            "basis": self.basis,
            "scale": self.scale,
            "sd": "sample (n-1)",
            "tail": "one-sided, direction of growth",
            "alpha": self.alpha,
        }

    def frame(self, rows: Iterable[TrendRow] | None = None) -> pd.DataFrame:
        rows = self.rows if rows is None else list(rows)
        records = []
        for r in rows:
            record: dict[str, Any] = {}
            if isinstance(r.subject, tuple):
                for i, part in enumerate(r.subject, start=1):
                    record[f"keyword_{i}"] = part
            else:
                record["subject"] = r.subject
            if self.basis == "share":
                record.update((f"{label} (%)", share * 100.0) for label, share in zip(self.labels, r.shares))
            else:
                record.update(zip(self.labels, r.counts))
            record.update(growth=r.growth, z=r.z, p=r.p, significant=r.significant(self.alpha), no_signal=r.no_signal)
            records.append(record)
        return pd.DataFrame(records)


def trends_from_counts(
    matrix: pd.DataFrame,
    denominators: Sequence[int],
    basis: str = "share",
    scale: float = 100.0,
) -> list[TrendRow]:
    """Growth, z and p for every row of a subject x window count matrix."""
    if basis not in BASES:
        raise TrendError(f"unknown basis {basis!r}; expected one of {', '.join(BASES)}")
    if len(matrix) < 2:
        raise TrendError("population error: fewer than 2 eligible subjects")
    subjects = list(matrix.index)
    counts = matrix.to_numpy(dtype="int64")
    den = np.asarray(denominators, dtype=float)
    shares = np.divide(counts, den, out=np.zeros(counts.shape, dtype=float), where=den > 0)

    values = shares if basis == "share" else counts.astype(float)
    growths = np.array([growth(v, scale) for v in values])
    zs = zscores(growths)
    rows = [
        TrendRow(
            subject=subject,
            counts=tuple(int(c) for c in counts[i]),
            shares=tuple(float(s) for s in shares[i]),
            growth=float(growths[i]),
            z=float(zs[i]),
            p=tail_probability(float(zs[i])),
            no_signal=not values[i].any(),
        )
        for i, subject in enumerate(subjects)
    ]
    rows.sort(key=lambda r: (-r.growth, r.subject))
    return rows


def trend_report(
    corpus: Corpus,
    kind: str = "keywords",
    min_total_count: int = 1,
    basis: str = "share",
    scale: float | None = None,
    alpha: float = 0.01,
    focus: Iterable[Subject] | None = None,
) -> TrendReport:
    """Trend rows for every subject with at least ``min_total_count`` occurrences.

    z is computed against all eligible subjects of the same kind; ``focus``
    only limits which rows are returned. Pair growth defaults to the unscaled
    ratio sum, keyword growth to percent.
    """
    if kind not in KINDS:
        raise TrendError(f"unknown subject kind {kind!r}; expected one of {', '.join(KINDS)}")
    if min_total_count < 1:
        raise TrendError("min_total_count must be at least 1")

    if kind == "keywords":
        matrix, denominators = corpus.keyword_counts, corpus.keyword_totals
    else:
        matrix, denominators = corpus.pair_counts, corpus.article_counts
    if scale is None:
        scale = 100.0 if kind == "keywords" else 1.0

    eligible = matrix[matrix.sum(axis=1) >= min_total_count]
    rows = trends_from_counts(eligible, denominators, basis, scale)
    population = len(rows)

    if focus is not None:
        wanted = [tuple(sorted(s)) if not isinstance(s, str) else s for s in focus]
        found = {r.subject for r in rows}
        missing = [s for s in wanted if s not in found]
        if missing:
            log.warning("%d focus subjects are not eligible: %s", len(missing), ", ".join(map(subject_label, missing[:5])))
        wanted_set = set(wanted)
        rows = [r for r in rows if r.subject in wanted_set]

    log.info("trend report over %d %s (min total %d)", population, kind, min_total_count)
    return TrendReport(
        kind=kind,
        labels=corpus.labels,
        rows=tuple(rows),
        population=population,
        min_total_count=min_total_count,
        basis=basis,
        scale=scale,
        alpha=alpha,
    )
