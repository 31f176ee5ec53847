from dataclasses import dataclass, field

import pandas as pd
from rich.console import Console
from rich.table import Table

from corpus_logic import Corpus
from geneword_logic import GeneWordPattern, derived_keywords
from ingest_logic import NormalizationConfig, canonicalize_keyword
from taxonomy_logic import TaxonomyTree, categorize_keyword, category_label
from trend_logic import ShareSeries, growth, keyword_shares


@dataclass(frozen=True)
class KeywordSummary:
    keyword: str
    labels: tuple[str, ...]
    series: ShareSeries
    growth: float
    partners: list[tuple[str, int]]
    derived: list[tuple[str, int]]
    categories: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class AuthorSummary:
    query: str
    authors: list[str]
    papers: pd.Series
    keywords: list[tuple[str, int]]


def keyword_summary(
    corpus: Corpus,
    keyword: str,
    normalization: NormalizationConfig | None = None,
    tree: TaxonomyTree | None = None,
    k: int = 10,
) -> KeywordSummary | None:
    kw = canonicalize_keyword(keyword, normalization)
    if kw not in corpus.keyword_counts.index:
        return None
    series = keyword_shares(corpus, kw)

    # co-occurring keywords, strongest first
    pairs = corpus.pair_frame
    hits = pairs[(pairs["a"] == kw) | (pairs["b"] == kw)]
    partner = hits["a"].where(hits["b"] == kw, hits["b"])
    counts = partner.value_counts()
    partners = sorted(((p, int(n)) for p, n in counts.items()), key=lambda kv: (-kv[1], kv[0]))[:k]

    family = derived_keywords(corpus, GeneWordPattern(kw))
    derived = sorted(family.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    categories = [category_label(c) for c in categorize_keyword(tree, kw).categories] if tree else []
    return KeywordSummary(kw, corpus.labels, series, growth(series), partners, derived, categories)


def author_summary(corpus: Corpus, name: str, k: int = 10) -> AuthorSummary | None:
    """Papers per window and top keywords of every author whose name contains ``name``."""
    rows = [(r.id, corpus.windows_by_id[r.id], a) for r in corpus.analysed for a in r.authors]
    df = pd.DataFrame(rows, columns=["id", "window", "author"])
    results = df[df["author"].str.upper().str.contains(name.strip().upper(), regex=False, na=False)]
    if results.empty:
        return None

    papers = results.drop_duplicates("id").groupby("window").size().reindex(range(corpus.n_windows), fill_value=0)
    papers.index = list(corpus.labels)
    kf = corpus.keyword_frame
    counts = kf[kf["id"].isin(results["id"])]["keyword"].value_counts()
    keywords = sorted(((kw, int(n)) for kw, n in counts.items()), key=lambda kv: (-kv[1], kv[0]))[:k]
    return AuthorSummary(name, sorted(results["author"].unique()), papers, keywords)


def print_keyword(console: Console, summary: KeywordSummary | None, query: str):
    if summary is None:
        console.print(f"No records found for keyword '{query}'.")
        return
    table = Table(title=f"{summary.keyword} (growth {summary.growth:.2f}%)")
    table.add_column("window")
    table.add_column("articles", justify="right")
    table.add_column("share (%)", justify="right")
    for label, n, pct in zip(summary.labels, summary.series.counts, summary.series.percent):
        table.add_row(label, str(n), f"{pct:.2f}")
    console.print(table)
    if summary.partners:
        console.print("Top partners: " + ", ".join(f"{p} ({n})" for p, n in summary.partners))
    if summary.derived:
        console.print("Derived keywords: " + ", ".join(f"{d} ({n})" for d, n in summary.derived))
    if summary.categories:
        console.print("Categories: " + "; ".join(summary.categories))


def print_author(console: Console, summary: AuthorSummary | None, query: str):
    if summary is None:
        console.print(f"No records found for author '{query}'.")
        return
    console.print(f"Matching authors: {', '.join(summary.authors[:10])}")
    table = Table(title="Papers per window")
    table.add_column("window")
    table.add_column("papers", justify="right")
    for label, n in summary.papers.items():
        table.add_row(str(label), str(int(n)))
    console.print(table)
    if summary.keywords:
        console.print("Top keywords: " + ", ".join(f"{kw} ({n})" for kw, n in summary.keywords))


def search(corpus: Corpus, normalization=None, tree=None, console: Console | None = None, ask=input):
    console = console or Console()
    while True:
        console.print("\n" + "=" * 30)
        console.print("KEYWORD INSIGHTS LOOKUP")
        console.print("1. Search by KEYWORD (e.g., insulin resistance)")
        console.print("2. Search by AUTHOR (e.g., SMITH)")
        console.print("3. Exit")
        choice = ask("Select an option (1-3): ").strip()

        if choice == "1":
            query = ask("Enter keyword: ")
            print_keyword(console, keyword_summary(corpus, query, normalization, tree), query)
        elif choice == "2":
            query = ask("Enter author name: ")
            print_author(console, author_summary(corpus, query), query)
        elif choice == "3":
            break
