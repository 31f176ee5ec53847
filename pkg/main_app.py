"""Command-line entry point: ingest exports, build reports, validate configs."""

import contextlib
import logging
from enum import Enum
from pathlib import Path
from typing import Annotated, Iterator

import pandas as pd
import typer
from rich.console import Console
from rich.logging import RichHandler

import basic_analysis
import lookup as lookup_tool
from config import RunConfig, load_config, validate_config
from corpus_logic import Corpus, load_corpus, save_corpus
from geneword_logic import candidates_frame, geneword_candidates, geneword_report, load_patterns
from graph_logic import (
    build_cooccurrence,
    build_window_graphs,
    detect_communities,
    graph_metrics_report,
    write_edge_list,
    write_graphml,
)
from ingest_logic import run_ingest
from map_logic import LabelPolicy, build_map, font_sizes, map_highlights, render_map
from report_io import write_outputs
from schema import ALL_LABEL, EXIT_INTERNAL, TOOL_NAME, TOOL_VERSION, ConfigError, InsightsError
from taxonomy_logic import category_distribution, category_trends, convert_mesh_xml, load_taxonomy
from trend_logic import basic_statistics, top_keywords, trend_report

log = logging.getLogger(TOOL_NAME)

app = typer.Typer(
    help="Keyword trend, co-occurrence and knowledge-map analysis of bibliographic exports.",
    context_settings={"help_option_names": ["-h", "--help"]},
    add_completion=False,
    pretty_exceptions_show_locals=False,
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)


class ReportKind(str, Enum):
    basic = "basic"
    trends = "trends"
    categories = "categories"
    graph = "graph"
    genewords = "genewords"
    map = "map"
    all = "all"


ConfigOption = Annotated[Path, typer.Option("--config", "-c", help="Run configuration (YAML)")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Override the configured seed")]
OutputOption = Annotated[Path | None, typer.Option("--output-dir", "-o", help="Override the configured output directory")]


def setup_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_time=False, show_path=False)],
        force=True,
    )


@contextlib.contextmanager
def guarded() -> Iterator[None]:
    """Map errors to exit codes: 1 config, 2 data, 3 anything else."""
    try:
        yield
    except InsightsError as e:
        err_console.print(f"[red]Error:[/red] {e}", markup=True, highlight=False)
        raise typer.Exit(e.exit_code) from None
    except typer.Exit:
        raise
    except Exception:
        log.exception("internal error")
        raise typer.Exit(EXIT_INTERNAL) from None


def _config(path: Path, seed: int | None, output_dir: Path | None) -> RunConfig:
    return load_config(path).with_overrides(seed=seed, output_dir=output_dir)


def _written(paths):
    for p in paths:
        console.print(f"  wrote {p}")


@app.callback()
def main(verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")] = False):
    setup_logging(verbose)


# --- INGEST ---
@app.command()
def ingest(config: ConfigOption, seed: SeedOption = None, output_dir: OutputOption = None):
    """Parse, clean, deduplicate and normalize the configured exports into a corpus file."""
    with guarded():
        cfg = _config(config, seed, output_dir)
        normalization = cfg.normalization.load()
        partition = cfg.periods.partition()
        corpus, report = run_ingest(cfg.inputs, normalization, partition, cfg.input_format, cfg.workers)
        save_corpus(corpus, cfg.corpus_path)

        meta = cfg.metadata() | {"stage": "ingest"}
        paths = write_outputs(report.to_frame(), cfg.run_dir, "ingest_report", meta, cfg.formats)
        console.print(
            f"[bold]Ingested[/bold] {report.parsed_total} rows: {sum(report.rejected.values())} rejected, "
            f"{report.duplicates} duplicates, {report.excluded} excluded, {report.stored} stored "
            f"({report.flagged} flagged)"
        )
        _written([cfg.corpus_path, *paths])


# --- REPORTS ---
def report_basic(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    out, paths = cfg.run_dir, []
    for name, frame in basic_statistics(corpus, cfg.trends.top).items():
        paths += write_outputs(frame, out, f"basic_{name}", meta, cfg.formats)
    paths.append(basic_analysis.plot_publications(corpus, out / "basic_publications.svg", meta=meta))
    paths.append(basic_analysis.plot_countries(corpus, out / "basic_countries.svg", meta=meta))
    return paths


def report_trends(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    out, spec, paths = cfg.run_dir, cfg.trends, []
    keywords = trend_report(corpus, "keywords", spec.min_total_count, spec.basis, alpha=spec.alpha)
    kmeta = meta | keywords.metadata()
    paths += write_outputs(keywords.frame(), out, "trends_keywords", kmeta, cfg.formats, index=False)
    paths += write_outputs(keywords.frame(keywords.increases(spec.top)), out, "trends_increases", kmeta, cfg.formats, index=False)
    paths += write_outputs(keywords.frame(keywords.decreases(spec.top)), out, "trends_decreases", kmeta, cfg.formats, index=False)

    frequent = [kw for kw, _ in top_keywords(corpus, spec.top)[ALL_LABEL]]
    focused = trend_report(corpus, "keywords", spec.min_total_count, spec.basis, alpha=spec.alpha, focus=frequent)
    paths += write_outputs(focused.frame(), out, "trends_frequent", kmeta, cfg.formats, index=False)

    pairs = trend_report(corpus, "pairs", spec.min_total_count, spec.basis, 100.0 if spec.pair_percent else 1.0, spec.alpha)
    paths += write_outputs(pairs.frame(), out, "trends_pairs", meta | pairs.metadata(), cfg.formats, index=False)
    paths.append(basic_analysis.trend_chart(keywords, out / "trends_keywords.html", meta=kmeta))
    return paths


def report_categories(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    spec = cfg.taxonomy
    if spec.path is None:
        raise ConfigError("the categories report needs taxonomy.path in the config")
    tree = load_taxonomy(spec.path, cfg.normalization.load())
    out, paths = cfg.run_dir, []
    for level in (1, 2):
        dist = category_distribution(corpus, tree, level, spec.single_label)
        dmeta = meta | dist.metadata()
        paths += write_outputs(dist.counts, out, f"categories_level{level}_counts", dmeta, cfg.formats)
        paths += write_outputs(dist.shares, out, f"categories_level{level}_shares", dmeta, cfg.formats)
        if level == spec.level:
            paths.append(basic_analysis.plot_categories(dist, out / f"categories_level{level}.svg", meta=dmeta))
    trends = category_trends(corpus, tree, 1, cfg.trends.min_total_count, spec.single_label, alpha=cfg.trends.alpha)
    paths += write_outputs(trends.frame(), out, "categories_trends", meta | trends.metadata(), cfg.formats, index=False)
    return paths


def report_graph(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    out = cfg.run_dir
    metrics = graph_metrics_report(corpus, cfg.seed, cfg.graph.universe, cfg.workers)
    gmeta = meta | {"density_universe": cfg.graph.universe, "community_detection": "louvain"}
    paths = write_outputs(metrics, out, "graph_metrics", gmeta, cfg.formats)
    if cfg.graph.export:
        for i, g in enumerate(build_window_graphs(corpus, cfg.workers)):
            stem = "all" if g.label == ALL_LABEL else f"w{i + 1}"
            wmeta = gmeta | {"window": g.label}
            paths.append(write_edge_list(g, out / "graphs" / f"cooccurrence_{stem}.tsv", wmeta))
            partition = detect_communities(g, cfg.seed) if g.n_nodes else {}
            paths.append(write_graphml(g, out / "graphs" / f"cooccurrence_{stem}.graphml", partition, wmeta))
    return paths


def report_genewords(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    spec, out = cfg.genewords, cfg.run_dir
    patterns = load_patterns(spec.patterns) if spec.patterns else []
    priority = load_patterns(spec.priority) if spec.priority else None
    thresholds = spec.thresholds()
    candidates = geneword_candidates(corpus, thresholds, patterns, priority)
    cmeta = meta | {"family_share_scope": thresholds.family_share_scope, "min_family_share": thresholds.min_family_share}
    paths = write_outputs(candidates_frame(candidates), out, "genewords_candidates", cmeta, cfg.formats, index=False)

    accepted = patterns or [c.pattern for c in candidates if c.passed]
    if not accepted:
        log.warning("no gene-word pattern configured or accepted; the family table is empty")
    summary = geneword_report(corpus, accepted, spec.word_boundary)
    paths += write_outputs(summary.frame(), out, "genewords", meta | summary.metadata(), cfg.formats, index=False)
    return paths


def report_map(corpus: Corpus, cfg: RunConfig, meta: dict) -> list[Path]:
    spec, out = cfg.map, cfg.run_dir
    window = None if spec.window in (None, ALL_LABEL) else spec.window
    g = build_cooccurrence(corpus, window)
    counts = corpus.keyword_counts
    freq = counts.sum(axis=1) if window is None else counts[corpus.window_index(window)]
    frequencies = {k: int(n) for k, n in freq.items()}

    _, placed, field_, prominence = build_map(
        g, frequencies, cfg.seed, spec.max_nodes, spec.tol, spec.max_iters, spec.bandwidth, spec.grid
    )
    mmeta = meta | {"window": g.label, "iterations": placed.iterations, "converged": placed.converged}
    policy = LabelPolicy(max_labels=spec.max_labels)
    svg, data = render_map(placed, field_, prominence, out / "map.svg", out / "map.json", policy, mmeta)

    table = placed.frame()
    table["weight"] = field_.weights
    table["prominence"] = prominence
    table["font_size"] = font_sizes(prominence)
    table["score"] = field_.score_at(placed.coords)
    highlights = map_highlights(placed, field_, prominence)
    highlight_frame = pd.DataFrame({"keyword": highlights})
    return [
        svg,
        data,
        *write_outputs(table, out, "map_layout", mmeta | {"objective": placed.objective}, cfg.formats),
        *write_outputs(highlight_frame, out, "map_highlights", mmeta, cfg.formats, index=False),
    ]


REPORTS = {
    "basic": report_basic,
    "trends": report_trends,
    "categories": report_categories,
    "graph": report_graph,
    "genewords": report_genewords,
    "map": report_map,
}


@app.command()
def report(
    which: Annotated[ReportKind, typer.Argument(help="Report to build")],
    config: ConfigOption,
    seed: SeedOption = None,
    output_dir: OutputOption = None,
):
    """Build one report (or all of them) from the ingested corpus."""
    with guarded():
        cfg = _config(config, seed, output_dir)
        corpus = load_corpus(cfg.corpus_path)
        meta = cfg.metadata() | {"report": which.value}
        kinds = list(REPORTS) if which is ReportKind.all else [which.value]
        for kind in kinds:
            if which is ReportKind.all and kind == "categories" and cfg.taxonomy.path is None:
                log.warning("skipping categories: no taxonomy configured")
                continue
            console.print(f"[bold]{kind}[/bold] report")
            _written(REPORTS[kind](corpus, cfg, meta | {"report": kind}))


# --- HELPERS ---
@app.command()
def validate(config: ConfigOption):
    """Check every path, table and threshold in the config; report all problems at once."""
    with guarded():
        cfg = load_config(config)
        problems = validate_config(cfg)
        if problems:
            for p in problems:
                err_console.print(f"[red]✗[/red] {p}", highlight=False)
            err_console.print(f"{len(problems)} problem(s) found")
            raise typer.Exit(ConfigError.exit_code)
        console.print(f"[green]OK[/green] config hash {cfg.config_hash[:12]}")


@app.command()
def lookup(
    config: ConfigOption,
    query: Annotated[str | None, typer.Argument(help="Keyword (or author with --author)")] = None,
    author: Annotated[bool, typer.Option("--author", "-a", help="Look up an author instead of a keyword")] = False,
):
    """Quick lookup of one keyword or author; opens a menu when no query is given."""
    with guarded():
        cfg = load_config(config)
        corpus = load_corpus(cfg.corpus_path)
        normalization = cfg.normalization.load()
        tree = load_taxonomy(cfg.taxonomy.path, normalization) if cfg.taxonomy.path else None
        if query is None:
            lookup_tool.search(corpus, normalization, tree, console)
        elif author:
            lookup_tool.print_author(console, lookup_tool.author_summary(corpus, query), query)
        else:
            lookup_tool.print_keyword(console, lookup_tool.keyword_summary(corpus, query, normalization, tree), query)


@app.command("convert-mesh")
def convert_mesh(
    xml: Annotated[Path, typer.Argument(help="Descriptor XML (.xml or .xml.gz)")],
    out: Annotated[Path, typer.Argument(help="Taxonomy file to write")],
):
    """Convert a MeSH-style descriptor XML file into the taxonomy line format."""
    with guarded():
        n = convert_mesh_xml(xml, out)
        console.print(f"wrote {n} nodes to {out}")


@app.command()
def version():
    console.print(f"{TOOL_NAME} {TOOL_VERSION}")


if __name__ == "__main__":
    app()
