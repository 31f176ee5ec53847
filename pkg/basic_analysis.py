import html
from collections.abc import Mapping
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd
import plotly.express as px
import seaborn as sns

from corpus_logic import Corpus
from report_io import atomic_path, atomic_write_text, flat_metadata, metadata_text
from schema import ALL_LABEL, TOOL_NAME, UNCATEGORIZED
from taxonomy_logic import CategoryDistribution
from trend_logic import TrendReport, authors_per_paper, country_ranking, international_share, subject_label

# --- CONFIGURATION ---
# Fixed hash salt and no date stamp so reruns write identical SVG bytes
SVG_STYLE = {"svg.hashsalt": TOOL_NAME, "svg.fonttype": "none"}
TREND_DIV_ID = "keyword-trends"
PALETTE = "viridis"


def save_svg(fig, path, meta: Mapping[str, Any] | None = None):
    with atomic_path(path) as tmp:
        fig.savefig(tmp, format="svg", metadata={"Date": None, "Description": metadata_text(meta) or None})
    plt.close(fig)
    return path


def publications_by_year(corpus: Corpus) -> pd.Series:
    """Articles per publication year over the configured range (missing years are 0)."""
    counts = corpus.frame["year"].value_counts()
    years = range(corpus.partition.start, corpus.partition.end + 1)
    return counts.reindex(years, fill_value=0).rename("publications")


def plot_publications(corpus: Corpus, path, meta: Mapping[str, Any] | None = None):
    """Publications per year with the mean author count per window on a second axis."""
    per_year = publications_by_year(corpus)
    authors = authors_per_paper(corpus)
    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(10, 5))
        sns.barplot(x=per_year.index.astype(str), y=per_year.values, color="steelblue", ax=ax)
        ax.set_xlabel("Year")
        ax.set_ylabel("Publications")
        ax.tick_params(axis="x", rotation=90)

        # window means drawn at each window's middle year
        twin = ax.twinx()
        years = list(per_year.index)
        mids = [years.index(start) + (end - start) / 2 for start, end in corpus.partition.windows]
        twin.plot(mids, authors.values, color="firebrick", marker="o", linestyle="--", label="Authors per paper")
        twin.set_ylabel("Authors per paper")
        twin.legend(loc="upper left")
        ax.set_title("Publications per year")
        fig.tight_layout()
        return save_svg(fig, path, meta)


def plot_countries(corpus: Corpus, path, k: int = 10, meta: Mapping[str, Any] | None = None):
    """Top countries overall and the international share per window."""
    ranking = country_ranking(corpus, k)[ALL_LABEL]
    share = international_share(corpus) * 100
    with plt.rc_context(SVG_STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(12, 5))
        if ranking:
            names, counts = zip(*ranking)
            sns.barplot(x=list(counts), y=list(names), color="seagreen", ax=left)
        left.set_title(f"Top {k} countries")
        left.set_xlabel("Articles")

        sns.barplot(x=list(share.index), y=share.fillna(0).values, color="purple", ax=right)
        right.set_title("International collaboration")
        right.set_ylabel("Articles with 2+ countries (%)")
        right.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        return save_svg(fig, path, meta)


def plot_categories(distribution: CategoryDistribution, path, top: int = 15, meta: Mapping[str, Any] | None = None):
    """Share of keyword occurrences per category and window."""
    shares = distribution.shares.drop(index=UNCATEGORIZED, errors="ignore").drop(columns=ALL_LABEL)
    shares = shares.head(top) * 100
    long = shares.reset_index().melt(id_vars="category", var_name="window", value_name="share")
    with plt.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(12, 8))
        sns.barplot(data=long, y="category", x="share", hue="window", palette=PALETTE, ax=ax)
        ax.set_xlabel("Share of keyword occurrences (%)")
        ax.set_ylabel("")
        ax.set_title(f"Categorized keywords, level {distribution.level} (coverage {distribution.coverage:.1%})")
        ax.grid(axis="x", alpha=0.3)
        fig.tight_layout()
        return save_svg(fig, path, meta)


def trend_chart(report: TrendReport, path, n: int = 10, meta: Mapping[str, Any] | None = None):
    """Interactive line chart of the top-n growing subjects' shares, as standalone HTML."""
    rows = report.increases(n)
    data = pd.DataFrame(
        [
            {"subject": subject_label(r.subject), "window": label, "share (%)": share * 100}
            for r in rows
            for label, share in zip(report.labels, r.shares)
        ],
        columns=["subject", "window", "share (%)"],
    )
    fig = px.line(data, x="window", y="share (%)", color="subject", markers=True,
                  title=f"Top {len(rows)} growing {report.kind}")
    page = fig.to_html(include_plotlyjs="cdn", full_html=True, div_id=TREND_DIV_ID)
    tags = "".join(
        f'<meta name="{html.escape(key)}" content="{html.escape(str(value))}" />'
        for key, value in flat_metadata(meta).items()
    )
    atomic_write_text(path, page.replace("<head>", "<head>" + tags, 1))
    return path
