import textwrap

import pytest

from corpus_logic import ArticleRecord, PeriodPartition, build_corpus

WINDOWS = ((1993, 1997), (1998, 2002), (2003, 2007), (2008, 2012))

EXPORT_HEADER = "Authors,Title,Year,Source title,Cited by,DOI,Affiliations,Author Keywords"


def record(rid, year, keywords=("obesity",), authors=("Smith J.",), countries=(), **extra):
    """ArticleRecord with one affiliation per country."""
    affiliations = tuple((f"Some University, {c}", c) for c in countries)
    return ArticleRecord(
        id=rid,
        title=extra.pop("title", f"Title {rid}"),
        year=year,
        authors=tuple(authors),
        affiliations=affiliations,
        keywords=tuple(keywords),
        **extra,
    )


def corpus_of(records, windows=WINDOWS, labels=None):
    return build_corpus(records, PeriodPartition.from_windows(windows, labels))


def keyword_corpus(per_window, windows=WINDOWS):
    """Corpus from ``[[keywords of article 1, keywords of article 2, ...], ...]`` per window."""
    records = []
    for w, articles in enumerate(per_window):
        for i, keywords in enumerate(articles):
            records.append(record(f"w{w}a{i}", windows[w][0], keywords))
    return corpus_of(records, windows)


def export_csv(rows):
    """Export file text from (authors, title, year, doi, affiliations, keywords) tuples."""
    lines = [EXPORT_HEADER]
    for authors, title, year, doi, affiliations, keywords in rows:
        lines.append(f'"{authors}","{title}",{year},Journal,3,{doi},"{affiliations}","{keywords}"')
    return "\n".join(lines) + "\n"


@pytest.fixture
def small_corpus():
    return corpus_of(
        [
            record("a1", 1994, ["obesity", "insulin", "insulin resistance"], ["A", "B"], ["Australia", "China"]),
            record("a2", 1995, ["obesity", "diet"], ["A", "B", "C", "D"], ["Australia"]),
            record("a3", 2000, ["obesity", "insulin resistance"], ["C"], ["China"]),
            record("a4", 2010, ["obesity", "insulin resistance", "diet"], ["D", "E"], ["India", "China"]),
        ]
    )


@pytest.fixture
def write_file(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(text).lstrip("\n"), encoding="utf-8")
        return path

    return _write
