"""Keyword co-occurrence networks and their summary measures.

Edge weight = number of analysed articles in the window holding both
keywords. Keywords seen in the window without any partner are kept as
isolates next to the graph, not inside it.
"""

import logging
import math
from collections.abc import Iterable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import networkx as nx
import pandas as pd

from corpus_logic import Corpus
from report_io import atomic_path, atomic_write_text, flat_metadata, metadata_header
from schema import ALL_LABEL, GRAPH_ROWS, DataError

log = logging.getLogger(__name__)

UNIVERSES = ("observed", "endpoints")
MODULARITY_TOLERANCE = 1e-9


class GraphError(DataError):
    pass


@dataclass(frozen=True, eq=False)
class CooccurrenceGraph:
    label: str
    graph: nx.Graph
    isolates: frozenset[str] = frozenset()

    @property
    def n_nodes(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def n_edges(self) -> int:
        return self.graph.number_of_edges()

    @property
    def total_weight(self) -> int:
        return int(self.graph.size(weight="weight"))

    def weight(self, a: str, b: str) -> int:
        data = self.graph.get_edge_data(a, b)
        return int(data["weight"]) if data else 0

    def strength(self, node: str) -> int:
        return int(self.graph.degree(node, weight="weight")) if node in self.graph else 0

    def edge_weights(self) -> dict[tuple[str, str], int]:
        return {tuple(sorted((a, b))): int(w) for a, b, w in self.graph.edges(data="weight")}


def canonical_graph(edges: Iterable[tuple[str, str, int]], nodes: Iterable[str] = ()) -> nx.Graph:
    """Graph with nodes and edges inserted in sorted order, whatever the input order."""
    merged: dict[tuple[str, str], int] = {}
    extra = set(nodes)
    for a, b, w in edges:
        if a == b:
            raise GraphError(f"self-loop on {a!r}")
        if w < 1:
            raise GraphError(f"edge {a!r}-{b!r} has weight {w} < 1")
        key = (a, b) if a < b else (b, a)
        merged[key] = merged.get(key, 0) + int(w)
    g = nx.Graph()
    g.add_nodes_from(sorted(extra | {n for pair in merged for n in pair}))
    g.add_weighted_edges_from((a, b, w) for (a, b), w in sorted(merged.items()))
    return g


def from_edges(edges: Iterable[tuple[str, str, int]], label: str = "", isolates: Iterable[str] = ()) -> CooccurrenceGraph:
    g = canonical_graph(edges)
    return CooccurrenceGraph(label, g, frozenset(set(isolates) - set(g)))


def build_cooccurrence(corpus: Corpus, window: int | str | None) -> CooccurrenceGraph:
    """Co-occurrence graph of one window (``None`` for the whole corpus)."""
    pairs = corpus.pair_frame
    keywords = corpus.keyword_frame
    if window is None:
        label = ALL_LABEL
    else:
        w = corpus.window_index(window)
        label = corpus.labels[w]
        pairs = pairs[pairs["window"] == w]
        keywords = keywords[keywords["window"] == w]

    weights = pairs.groupby(["a", "b"]).size()
    g = canonical_graph((a, b, int(n)) for (a, b), n in weights.items())
    isolates = frozenset(set(keywords["keyword"]) - set(g))
    log.debug("graph %s: %d nodes, %d edges, %d isolates", label, g.number_of_nodes(), g.number_of_edges(), len(isolates))
    return CooccurrenceGraph(label, g, isolates)


def build_window_graphs(corpus: Corpus, workers: int = 4) -> list[CooccurrenceGraph]:
    """One graph per window followed by the whole-corpus graph."""
    # warm the shared frames before fanning out
    corpus.pair_frame, corpus.keyword_frame
    windows = list(range(corpus.n_windows)) + [None]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda w: build_cooccurrence(corpus, w), windows))


# --- MEASURES ---
def average_weighted_degree(g: CooccurrenceGraph) -> float:
    """Mean weight of the edges present (A-B: 10, B-C: 20 gives 15)."""
    if not g.n_edges:
        return math.nan
    return math.fsum(w for _, _, w in g.graph.edges(data="weight")) / g.n_edges


def mean_node_strength(g: CooccurrenceGraph) -> float:
    """Conventional average weighted degree: total incident weight per connected node."""
    if not g.n_edges:
        return math.nan
    return 2.0 * g.total_weight / g.n_nodes


def density(g: CooccurrenceGraph, universe: str = "observed") -> float:
    if universe not in UNIVERSES:
        raise ValueError(f"unknown node universe {universe!r}")
    n = g.n_nodes + (len(g.isolates) if universe == "observed" else 0)
    if n < 2:
        return math.nan
    return g.n_edges / (n * (n - 1) / 2)


def average_clustering(g: CooccurrenceGraph) -> float:
    """Unweighted local clustering averaged over nodes with at least one edge."""
    if not g.n_nodes:
        log.warning("average clustering of empty graph %s reported as 0", g.label or "(unlabelled)")
        return 0.0
    return float(nx.average_clustering(g.graph))


def detect_communities(g: CooccurrenceGraph, seed: int = 0, resolution: float = 1.0) -> dict[str, int]:
    """Louvain partition; ids are contiguous from 0, ordered by each community's smallest member."""
    if not g.n_nodes:
        raise GraphError(f"cannot detect communities in empty graph {g.label}")
    canonical = canonical_graph(((a, b, w) for a, b, w in g.graph.edges(data="weight")), g.graph.nodes)
    if not canonical.number_of_edges():
        communities = [{n} for n in canonical]
    else:
        communities = nx.community.louvain_communities(
            canonical, weight="weight", resolution=resolution, threshold=MODULARITY_TOLERANCE, seed=seed
        )
    ordered = sorted((sorted(c) for c in communities), key=lambda members: members[0])
    return {node: cid for cid, members in enumerate(ordered) for node in members}


def modularity(g: CooccurrenceGraph, partition: Mapping[str, int], resolution: float = 1.0) -> float:
    nodes = set(g.graph)
    if set(partition) != nodes:
        missing = sorted(nodes - set(partition))[:5]
        extra = sorted(set(partition) - nodes)[:5]
        raise GraphError(f"partition does not match graph nodes (missing {missing}, unknown {extra})")
    if not g.total_weight:
        return math.nan
    groups: dict[int, set[str]] = {}
    for node, cid in partition.items():
        groups.setdefault(cid, set()).add(node)
    return float(nx.community.modularity(g.graph, list(groups.values()), weight="weight", resolution=resolution))


def graph_metrics(g: CooccurrenceGraph, seed: int = 0, universe: str = "observed") -> dict[str, float]:
    if not g.n_nodes and not g.isolates:
        return {"nodes": 0, "edges": 0} | {row: math.nan for row in GRAPH_ROWS[2:]}
    partition = detect_communities(g, seed) if g.n_nodes else {}
    return {
        "nodes": g.n_nodes + len(g.isolates),
        "edges": g.n_edges,
        "average_weighted_degree": average_weighted_degree(g),
        "mean_node_strength": mean_node_strength(g),
        "density": density(g, universe),
        "modularity": modularity(g, partition) if partition else math.nan,
        "communities": len(set(partition.values())) if partition else math.nan,
        "average_clustering": average_clustering(g),
    }


def graph_metrics_report(
    corpus: Corpus,
    seed: int = 0,
    universe: str = "observed",
    workers: int = 4,
) -> pd.DataFrame:
    """Measures as rows, one column per window plus the whole corpus."""
    graphs = build_window_graphs(corpus, workers)
    columns = {g.label: graph_metrics(g, seed, universe) for g in graphs}
    report = pd.DataFrame(columns, index=list(GRAPH_ROWS))
    report.index.name = "measure"
    return report


# --- EXPORT ---
def write_edge_list(g: CooccurrenceGraph, path: str | Path, meta: Mapping[str, Any] | None = None) -> Path:
    """Tab-separated ``a  b  weight`` lines under the usual ``# key: value`` header."""
    lines = nx.generate_edgelist(g.graph, delimiter="\t", data=["weight"])
    body = "".join(f"{line}\n" for line in lines)
    return atomic_write_text(path, metadata_header(meta) + body)


def write_graphml(
    g: CooccurrenceGraph,
    path: str | Path,
    partition: Mapping[str, int] | None = None,
    meta: Mapping[str, Any] | None = None,
) -> Path:
    export = nx.Graph(label=g.label)
    # graph-level attributes must be scalars
    export.graph.update(flat_metadata(meta))
    for node in sorted(set(g.graph) | g.isolates):
        attrs = {"strength": g.strength(node), "isolated": node in g.isolates}
        if partition is not None and node in partition:
            attrs["community"] = int(partition[node])
        export.add_node(node, **attrs)
    export.add_weighted_edges_from(g.graph.edges(data="weight"))
    with atomic_path(path) as tmp:
        nx.write_graphml(export, tmp, encoding="utf-8", prettyprint=True)
    return Path(path)
