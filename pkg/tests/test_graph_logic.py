import itertools
import math
from collections import Counter

import networkx as nx
import numpy as np
import pytest

from graph_logic import (
    CooccurrenceGraph,
    GraphError,
    average_clustering,
    average_weighted_degree,
    build_cooccurrence,
    build_window_graphs,
    canonical_graph,
    density,
    detect_communities,
    from_edges,
    graph_metrics,
    graph_metrics_report,
    mean_node_strength,
    modularity,
    write_edge_list,
    write_graphml,
)
from schema import GRAPH_ROWS
from tests.conftest import keyword_corpus

TWO_TRIANGLES = [("a", "b", 1), ("b", "c", 1), ("a", "c", 1), ("d", "e", 1), ("e", "f", 1), ("d", "f", 1), ("c", "d", 1)]


def random_graph(rng, max_nodes=30):
    n = int(rng.integers(3, max_nodes))
    nodes = [f"n{i:02d}" for i in range(n)]
    p = rng.uniform(0.1, 0.8)
    edges = [(a, b, int(rng.integers(1, 20))) for a, b in itertools.combinations(nodes, 2) if rng.random() < p]
    if not edges:
        edges = [(nodes[0], nodes[1], 1)]
    return from_edges(edges, "random")


def clustering_oracle(g):
    adj = {n: set(g.graph[n]) for n in g.graph}
    values = []
    for n, nbrs in adj.items():
        k = len(nbrs)
        if k < 2:
            values.append(0.0)
            continue
        links = sum(1 for u, v in itertools.combinations(sorted(nbrs), 2) if v in adj[u])
        values.append(2.0 * links / (k * (k - 1)))
    return sum(values) / len(values)


def modularity_oracle(g, partition):
    two_m = 2 * g.total_weight
    nodes = list(g.graph)
    q = 0.0
    for i in nodes:
        for j in nodes:
            if partition[i] == partition[j]:
                q += g.weight(i, j) - g.strength(i) * g.strength(j) / two_m
    return q / two_m


class TestBuildCooccurrence:
    def test_triangle(self):
        c = keyword_corpus([[["a", "b", "c"]], [], [], []])
        g = build_cooccurrence(c, 0)
        assert g.edge_weights() == {("a", "b"): 1, ("a", "c"): 1, ("b", "c"): 1}

    def test_repeated_pair(self):
        c = keyword_corpus([[["a", "b"], ["b", "a"]], [], [], []])
        assert build_cooccurrence(c, "1993-1997").weight("a", "b") == 2

    def test_isolates_kept_outside_graph(self):
        c = keyword_corpus([[["a", "b"], ["z"]], [], [], []])
        g = build_cooccurrence(c, 0)
        assert g.isolates == frozenset({"z"})
        assert "z" not in g.graph

    def test_edge_multiset_matches_pair_enumeration(self):
        rng = np.random.default_rng(21)
        vocab = [f"k{i}" for i in range(15)]
        for _ in range(50):
            per_window = [
                [list(rng.choice(vocab, size=rng.integers(1, 6), replace=False)) for _ in range(rng.integers(1, 8))]
                for _ in range(4)
            ]
            c = keyword_corpus(per_window)
            expected = Counter(
                pair
                for articles in per_window
                for article in articles
                for pair in itertools.combinations(sorted(str(k) for k in article), 2)
            )
            assert build_cooccurrence(c, None).edge_weights() == dict(expected)

    def test_window_graphs_end_with_all(self, small_corpus):
        graphs = build_window_graphs(small_corpus, workers=2)
        assert [g.label for g in graphs] == list(small_corpus.labels) + ["all"]

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError):
            from_edges([("a", "a", 1)])


class TestMeasures:
    def test_worked_example(self):
        g = from_edges([("A", "B", 10), ("B", "C", 20)])
        assert average_weighted_degree(g) == 15
        assert mean_node_strength(g) == 20

    def test_equal_weights(self):
        g = from_edges([("a", "b", 4), ("b", "c", 4), ("c", "d", 4)])
        assert average_weighted_degree(g) == 4

    def test_density(self):
        assert density(from_edges([("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])) == 1.0
        assert density(from_edges([("a", "b", 1)], isolates=["c"])) == pytest.approx(1 / 3)
        assert density(from_edges([("a", "b", 1)], isolates=["c"]), "endpoints") == 1.0

    def test_clustering(self):
        assert average_clustering(from_edges([("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])) == 1.0
        assert average_clustering(from_edges([("a", "b", 1), ("b", "c", 1)])) == 0.0

    def test_empty_graph_clustering(self):
        assert average_clustering(from_edges([])) == 0.0

    def test_random_graphs_match_oracles(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            g = random_graph(rng)
            weights = [w for _, _, w in g.graph.edges(data="weight")]
            n, m = g.n_nodes, g.n_edges
            assert average_weighted_degree(g) == pytest.approx(sum(weights) / len(weights), abs=1e-9)
            assert density(g) == pytest.approx(m / (n * (n - 1) / 2), abs=1e-9)
            assert average_clustering(g) == pytest.approx(clustering_oracle(g), abs=1e-9)

    def test_weight_scaling(self):
        rng = np.random.default_rng(8)
        g = random_graph(rng)
        scaled = from_edges([(a, b, 3 * w) for a, b, w in g.graph.edges(data="weight")])
        assert average_weighted_degree(scaled) == pytest.approx(3 * average_weighted_degree(g))
        assert density(scaled) == density(g)
        assert average_clustering(scaled) == average_clustering(g)


class TestCommunities:
    def test_two_triangles(self):
        partition = detect_communities(from_edges(TWO_TRIANGLES))
        assert partition == {"a": 0, "b": 0, "c": 0, "d": 1, "e": 1, "f": 1}

    def test_complete_graph(self):
        g = from_edges([(a, b, 1) for a, b in itertools.combinations("abcde", 2)])
        assert set(detect_communities(g).values()) == {0}

    def test_shuffled_input_same_partition(self):
        rng = np.random.default_rng(2)
        g = random_graph(rng, 40)
        edges = list(g.graph.edges(data="weight"))
        expected = detect_communities(g, seed=3)
        for _ in range(5):
            order = rng.permutation(len(edges))
            shuffled = from_edges([(edges[i][1], edges[i][0], edges[i][2]) for i in order])
            assert detect_communities(shuffled, seed=3) == expected

    def test_edgeless_graph_gives_singletons(self):
        g = CooccurrenceGraph("x", canonical_graph([], ["b", "a"]))
        assert detect_communities(g) == {"a": 0, "b": 1}

    def test_empty_graph_rejected(self):
        with pytest.raises(GraphError):
            detect_communities(from_edges([]))


class TestModularity:
    def test_single_community_is_zero(self):
        g = from_edges(TWO_TRIANGLES)
        assert modularity(g, {n: 0 for n in g.graph}) == pytest.approx(0.0, abs=1e-12)

    def test_singletons(self):
        g = from_edges(TWO_TRIANGLES)
        two_m = 2 * g.total_weight
        expected = -sum((g.strength(n) / two_m) ** 2 for n in g.graph)
        q = modularity(g, {n: i for i, n in enumerate(sorted(g.graph))})
        assert q == pytest.approx(expected)
        assert q < 0

    def test_two_triangle_partition(self):
        g = from_edges(TWO_TRIANGLES)
        partition = {n: int(n in "def") for n in g.graph}
        # 3 internal edges and degree sum 7 per side, m = 7
        expected = 2 * (3 / 7 - (7 / 14) ** 2)
        assert modularity(g, partition) == pytest.approx(expected)

    def test_partition_must_cover_nodes(self):
        g = from_edges(TWO_TRIANGLES)
        with pytest.raises(GraphError):
            modularity(g, {"a": 0})

    def test_random_graphs_match_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            g = random_graph(rng, 51)
            detected = detect_communities(g, seed=0)
            assert modularity(g, detected) == pytest.approx(modularity_oracle(g, detected), abs=1e-9)
            shuffled = {n: int(rng.integers(0, 4)) for n in g.graph}
            assert modularity(g, shuffled) == pytest.approx(modularity_oracle(g, shuffled), abs=1e-9)

    def test_range_and_baseline_on_random_graphs(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            g = random_graph(rng)
            detected = modularity(g, detect_communities(g, seed=0))
            singleton = modularity(g, {n: i for i, n in enumerate(g.graph)})
            assert -1.0 <= detected <= 1.0
            assert detected >= singleton - 1e-12


class TestMetricsReport:
    def test_layout(self, small_corpus):
        report = graph_metrics_report(small_corpus, workers=1)
        assert list(report.index) == list(GRAPH_ROWS)
        assert list(report.columns) == list(small_corpus.labels) + ["all"]

    def test_empty_window(self, small_corpus):
        column = graph_metrics_report(small_corpus)["2003-2007"]
        assert column["nodes"] == 0 and column["edges"] == 0
        assert column[list(GRAPH_ROWS[2:])].isna().all()

    def test_cells_equal_individual_measures(self, small_corpus):
        report = graph_metrics_report(small_corpus)
        g = build_cooccurrence(small_corpus, None)
        assert report.loc["average_weighted_degree", "all"] == pytest.approx(average_weighted_degree(g))
        assert report.loc["density", "all"] == pytest.approx(density(g))
        assert report.loc["average_clustering", "all"] == pytest.approx(average_clustering(g))
        assert report.loc["modularity", "all"] == pytest.approx(modularity(g, detect_communities(g)))

    def test_monotone_corpus(self):
        c = keyword_corpus(
            [
                [["a", "b"], ["c"], ["d"]],
                [["a", "b"], ["c", "d"]],
                [["a", "b"], ["c", "d"], ["a", "c"]],
                [["a", "b", "c", "d"]],
            ]
        )
        report = graph_metrics_report(c)
        edges = list(report.loc["edges", list(c.labels)])
        densities = list(report.loc["density", list(c.labels)])
        assert edges == [1, 2, 3, 6]
        assert densities == sorted(densities)

    def test_isolates_only_window(self, caplog):
        c = keyword_corpus([[["a"], ["b"]], [["a", "b"]], [], []])
        metrics = graph_metrics(build_cooccurrence(c, 0))
        assert metrics["nodes"] == 2 and metrics["edges"] == 0
        assert metrics["density"] == 0.0
        assert math.isnan(metrics["modularity"])
        assert metrics["average_clustering"] == 0.0
        assert "reported as 0" in caplog.text

    def test_empty_window_clustering_is_undefined(self):
        c = keyword_corpus([[["a", "b"]], [], [], []])
        assert math.isnan(graph_metrics(build_cooccurrence(c, 1))["average_clustering"])


class TestExport:
    def test_edge_list(self, tmp_path):
        path = write_edge_list(from_edges([("b", "a", 2), ("b", "c", 1)]), tmp_path / "g.tsv")
        assert path.read_text(encoding="utf-8").splitlines() == ["a\tb\t2", "b\tc\t1"]

    def test_edge_list_header(self, tmp_path):
        meta = {"config_hash": "abc123", "seed": 7, "window": "all"}
        path = write_edge_list(from_edges([("a", "b", 2)]), tmp_path / "g.tsv", meta)
        assert path.read_text(encoding="utf-8").splitlines() == [
            "# config_hash: abc123",
            "# seed: 7",
            "# window: all",
            "a\tb\t2",
        ]
        back = nx.read_weighted_edgelist(path, delimiter="\t")
        assert back["a"]["b"]["weight"] == 2.0

    def test_graphml_attributes(self, tmp_path):
        g = from_edges(TWO_TRIANGLES, "all", isolates=["z"])
        path = write_graphml(g, tmp_path / "g.graphml", detect_communities(g))
        back = nx.read_graphml(path)
        assert back.nodes["z"]["isolated"] is True
        assert back.nodes["a"]["strength"] == 2
        assert back.nodes["f"]["community"] == 1
        assert back.number_of_edges() == 7

    def test_graphml_metadata(self, tmp_path):
        meta = {"config_hash": "abc123", "seed": 7, "windows": ["w1", "w2"], "bandwidth": None}
        back = nx.read_graphml(write_graphml(from_edges(TWO_TRIANGLES, "all"), tmp_path / "g.graphml", meta=meta))
        assert back.graph["config_hash"] == "abc123"
        assert back.graph["seed"] == 7
        assert back.graph["windows"] == '["w1", "w2"]'
        assert back.graph["bandwidth"] == "NA"
