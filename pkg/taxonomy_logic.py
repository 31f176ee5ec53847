"""Hierarchical classification trees and keyword categorization.

Tree file format (docs/taxonomy_format.md), one node per line, tab separated:

    node_id <TAB> display name <TAB> parent ids, comma separated (empty for a root)

Lines starting with ``#`` and blank lines are ignored. A node may list
several parents; every root path through it is kept.
"""

import gzip
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import pandas as pd
from lxml import etree

from corpus_logic import Corpus
from ingest_logic import NormalizationConfig, canonicalize_keyword
from report_io import atomic_write_text
from schema import ALL_LABEL, UNCATEGORIZED, DataError
from trend_logic import TrendError, TrendReport, trends_from_counts

log = logging.getLogger(__name__)

LEVEL_SEPARATOR = " > "


class TaxonomyError(DataError):
    pass


@dataclass(frozen=True)
class TaxonomyNode:
    id: str
    name: str
    normalized: str
    parents: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class TaxonomyTree:
    nodes: dict[str, TaxonomyNode]
    children: dict[str, tuple[str, ...]]
    roots: tuple[str, ...]
    name_index: dict[str, tuple[str, ...]]
    _paths: dict[str, tuple[tuple[str, ...], ...]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, keyword: str) -> bool:
        return keyword in self.name_index

    def root_paths(self, node_id: str) -> tuple[tuple[str, ...], ...]:
        """Every root-to-node id path, sorted."""
        cached = self._paths.get(node_id)
        if cached is not None:
            return cached
        node = self.nodes[node_id]
        if not node.parents:
            paths = ((node_id,),)
        else:
            paths = tuple(sorted(p + (node_id,) for parent in node.parents for p in self.root_paths(parent)))
        self._paths[node_id] = paths
        return paths

    def path_names(self, path: Sequence[str]) -> tuple[str, ...]:
        return tuple(self.nodes[i].name for i in path)


@dataclass(frozen=True)
class CategoryAssignment:
    keyword: str
    categories: tuple[tuple[str, ...], ...] = ()

    @property
    def matched(self) -> bool:
        return bool(self.categories)


# --- LOADING ---
def read_taxonomy_lines(path: str | Path) -> list[tuple[int, str, str, tuple[str, ...]]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise TaxonomyError(f"taxonomy file not found: {path}") from None

    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.rstrip("\n").split("\t")
        if len(cols) < 2 or not cols[0].strip() or not cols[1].strip():
            raise TaxonomyError(f"{path}:{lineno}: expected 'node_id<TAB>name<TAB>parents'")
        parents = tuple(p.strip() for p in cols[2].split(",") if p.strip()) if len(cols) > 2 else ()
        entries.append((lineno, cols[0].strip(), cols[1].strip(), parents))
    return entries


def _find_cycle(parents: dict[str, tuple[str, ...]]) -> list[str] | None:
    """Return one parent-to-child cycle as a list of ids (first id repeated at the end), or None."""
    hierarchy = nx.DiGraph()
    hierarchy.add_nodes_from(sorted(parents))
    hierarchy.add_edges_from((p, child) for child in sorted(parents) for p in sorted(parents[child]) if p in parents)
    try:
        edges = nx.find_cycle(hierarchy)
    except nx.NetworkXNoCycle:
        return None
    return [u for u, _ in edges] + [edges[0][0]]


def taxonomy_problems(entries: Iterable[tuple[int, str, str, tuple[str, ...]]]) -> list[str]:
    """All structural problems: duplicate ids, unknown parents (orphans), cycles."""
    problems = []
    parents: dict[str, tuple[str, ...]] = {}
    for lineno, node_id, _, node_parents in entries:
        if node_id in parents:
            problems.append(f"line {lineno}: duplicate node id {node_id!r}")
            continue
        parents[node_id] = node_parents
    for node_id in sorted(parents):
        unknown = [p for p in parents[node_id] if p not in parents]
        if unknown:
            problems.append(f"orphan node {node_id!r}: unknown parent(s) {', '.join(unknown)}")
    cycle = _find_cycle(parents)
    if cycle:
        problems.append(f"cycle: {' -> '.join(cycle)}")
    return problems


def build_taxonomy(
    entries: Iterable[tuple[int, str, str, tuple[str, ...]]],
    config: NormalizationConfig | None = None,
) -> TaxonomyTree:
    entries = list(entries)
    problems = taxonomy_problems(entries)
    if problems:
        raise TaxonomyError("invalid taxonomy: " + "; ".join(problems))
    if not entries:
        raise TaxonomyError("empty taxonomy")

    nodes = {}
    children: dict[str, list[str]] = {}
    index: dict[str, list[str]] = {}
    for _, node_id, name, parents in entries:
        normalized = canonicalize_keyword(name, config)
        nodes[node_id] = TaxonomyNode(node_id, name, normalized, tuple(sorted(set(parents))))
        for p in parents:
            children.setdefault(p, []).append(node_id)
        index.setdefault(normalized, []).append(node_id)

    roots = tuple(sorted(i for i, n in nodes.items() if not n.parents))
    return TaxonomyTree(
        nodes=nodes,
        children={k: tuple(sorted(v)) for k, v in children.items()},
        roots=roots,
        name_index={k: tuple(sorted(v)) for k, v in index.items()},
    )


def load_taxonomy(path: str | Path, config: NormalizationConfig | None = None) -> TaxonomyTree:
    tree = build_taxonomy(read_taxonomy_lines(path), config)
    log.info("taxonomy %s: %d nodes, %d roots", Path(path).name, len(tree), len(tree.roots))
    return tree


# --- CATEGORIZATION ---
def categorize_keyword(
    tree: TaxonomyTree,
    keyword: str,
    depth: int = 2,
    single_label: bool = False,
) -> CategoryAssignment:
    """Top ``depth`` ancestor names on every root path of every node named ``keyword``.

    A path shorter than ``depth`` repeats its deepest node, so a root keyword
    maps to (root, root).
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    found = set()
    for node_id in tree.name_index.get(keyword, ()):
        for path in tree.root_paths(node_id):
            names = tree.path_names(path)
            found.add(tuple(names[min(level, len(names) - 1)] for level in range(depth)))
    categories = tuple(sorted(found))
    if single_label:
        categories = categories[:1]
    return CategoryAssignment(keyword, categories)


def category_label(category: Sequence[str]) -> str:
    return LEVEL_SEPARATOR.join(category)


@dataclass(frozen=True)
class CategoryDistribution:
    level: int
    counts: pd.DataFrame
    shares: pd.DataFrame
    coverage: float
    window_coverage: pd.Series
    single_label: bool = False

    def metadata(self) -> dict:
        return {
            "level": self.level,
            "mode": "single-label" if self.single_label else "multi-label",
            "coverage": self.coverage,
        }


def _category_matrix(
    corpus: Corpus, tree: TaxonomyTree, level: int, single_label: bool
) -> tuple[pd.DataFrame, pd.Series]:
    """Category x window counts and the per-window categorized occurrence counts."""
    matrix = corpus.keyword_counts
    links = []
    for keyword in matrix.index:
        assignment = categorize_keyword(tree, keyword, depth=level, single_label=single_label)
        for category in assignment.categories:
            links.append((keyword, category_label(category)))
    if not links:
        empty = pd.DataFrame(0, index=pd.Index([], name="category"), columns=matrix.columns, dtype="int64")
        return empty, pd.Series(0, index=matrix.columns, dtype="int64")

    mapping = pd.DataFrame(links, columns=["keyword", "category"])
    joined = mapping.join(matrix, on="keyword")
    counts = joined.drop(columns="keyword").groupby("category").sum().astype("int64")
    categorized = matrix.loc[mapping["keyword"].unique()].sum()
    return counts, categorized


def category_distribution(
    corpus: Corpus,
    tree: TaxonomyTree,
    level: int = 2,
    single_label: bool = False,
) -> CategoryDistribution:
    """Occurrences per category and window; each occurrence counts once per distinct category."""
    if level not in (1, 2):
        raise ValueError("level must be 1 or 2")
    # 1. Map occurrences onto categories
    counts, categorized = _category_matrix(corpus, tree, level, single_label)
    totals = pd.Series(corpus.keyword_totals, index=range(corpus.n_windows))

    # 2. Add the all-windows column and the uncategorized row
    counts[ALL_LABEL] = counts.sum(axis=1)
    counts = counts.loc[sorted(counts.index, key=lambda c: (-counts.at[c, ALL_LABEL], c))]
    uncategorized = [int(n) for n in totals - categorized]
    counts.loc[UNCATEGORIZED] = uncategorized + [sum(uncategorized)]
    counts = counts.astype("int64")
    counts.columns = list(corpus.labels) + [ALL_LABEL]
    counts.index.name = "category"

    # 3. Shares over all keyword occurrences of each window
    denominators = list(corpus.keyword_totals) + [sum(corpus.keyword_totals)]
    shares = counts.div([d if d else float("nan") for d in denominators], axis=1)

    # 4. Coverage
    window_coverage = categorized / totals.where(totals > 0)
    window_coverage.index = list(corpus.labels)
    coverage = float(categorized.sum() / totals.sum())
    log.info("categorized %.1f%% of keyword occurrences at level %d", coverage * 100, level)
    return CategoryDistribution(level, counts, shares, coverage, window_coverage, single_label)


def category_trends(
    corpus: Corpus,
    tree: TaxonomyTree,
    level: int = 1,
    min_total_count: int = 1,
    single_label: bool = False,
    scale: float = 100.0,
    alpha: float = 0.01,
) -> TrendReport:
    """Growth, z and tail p for category shares of all keyword occurrences."""
    counts, _ = _category_matrix(corpus, tree, level, single_label)
    eligible = counts[counts.sum(axis=1) >= min_total_count]
    if len(eligible) < 2:
        raise TrendError(f"population error: fewer than 2 categories at level {level} with {min_total_count}+ occurrences")
    rows = trends_from_counts(eligible, corpus.keyword_totals, "share", scale)
    return TrendReport(
        kind=f"categories-level-{level}",
        labels=corpus.labels,
        rows=tuple(rows),
        population=len(rows),
        min_total_count=min_total_count,
        basis="share",
        scale=scale,
        alpha=alpha,
    )


# --- MESH XML CONVERSION ---
def convert_mesh_xml(xml_path: str | Path, out_path: str | Path) -> int:
    """Write a descriptor XML file (optionally gzipped) in the tree line format.

    Nodes are descriptors; the parent of tree number ``X.Y`` is the
    descriptor holding ``X``. Returns the number of nodes written.
    """
    # 1. Read the descriptor file
    xml_path = Path(xml_path)
    opener = gzip.open if xml_path.suffix == ".gz" else open
    try:
        with opener(xml_path, "rb") as fh:
            root = etree.parse(fh).getroot()
    except OSError as e:
        raise TaxonomyError(f"cannot read {xml_path}: {e}") from None
    except etree.XMLSyntaxError as e:
        raise TaxonomyError(f"{xml_path}: malformed XML ({e})") from None

    # 2. Collect names and tree numbers per descriptor
    names: dict[str, str] = {}
    numbers: dict[str, str] = {}
    trees: dict[str, list[str]] = {}
    for record in root.iter("DescriptorRecord"):
        ui = record.findtext("DescriptorUI", "").strip()
        name = record.findtext("DescriptorName/String", "").strip()
        if not ui or not name:
            continue
        names[ui] = name
        trees[ui] = [tn.text.strip() for tn in record.findall("TreeNumberList/TreeNumber") if tn.text]
        for tn in trees[ui]:
            numbers[tn] = ui

    # 3. Resolve each tree number to its parent descriptor
    lines = ["# node_id\tname\tparents"]
    missing = 0
    for ui in sorted(names):
        parents = set()
        for tn in trees[ui]:
            if "." not in tn:
                continue
            parent = numbers.get(tn.rsplit(".", 1)[0])
            if parent is None:
                missing += 1
            elif parent != ui:
                parents.add(parent)
        lines.append(f"{ui}\t{names[ui]}\t{','.join(sorted(parents))}")
    if missing:
        log.warning("%d tree numbers have no parent descriptor; those links are dropped", missing)
    atomic_write_text(out_path, "\n".join(lines) + "\n")
    log.info("converted %d descriptors from %s", len(names), xml_path.name)
    return len(names)
