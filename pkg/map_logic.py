"""Two-dimensional knowledge maps of the co-occurrence network.

Pipeline: association strength similarities -> constrained layout ->
kernel density field -> SVG with a blue/green/red heat background and a
JSON sidecar holding everything needed to redraw the map.

Layout objective: sum over pairs of s_ij * d_ij^2 with the mean pairwise
distance fixed at 1. Each iteration solves the majorizing problem
X = L_s^+ B(Y) Y (L_s the Laplacian of s, B(Y) the Laplacian of 1/d_ij(Y))
and rescales, which never increases the objective.
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import networkx as nx
import numpy as np
import pandas as pd
from matplotlib.colors import LinearSegmentedColormap
from scipy.spatial.distance import cdist, pdist, squareform

from graph_logic import CooccurrenceGraph, canonical_graph
from report_io import atomic_path, metadata_text, write_json
from schema import TOOL_NAME, DataError

log = logging.getLogger(__name__)

SIMILARITY = "association strength: w_ij / (W_i * W_j)"
KERNEL = "triweight (1 - u^2)^3, u = distance / bandwidth"

# score -> RGB stops, also listed in docs/output_spec.md
RAMP_STOPS = (
    (0.0, (0.0, 0.0, 1.0)),
    (1.0, (0.0, 1.0, 0.0)),
    (2.0, (1.0, 0.0, 0.0)),
)
RAMP = LinearSegmentedColormap.from_list("density", [(s / 2.0, rgb) for s, rgb in RAMP_STOPS])

FONT_TIERS = (6.0, 7.5, 9.0, 11.0, 13.5, 16.0)
HIGHLIGHT_SCORE = 1.5
FLOOR_FRACTION = 1e-3
SVG_HASHSALT = TOOL_NAME


class MapError(DataError):
    pass


# --- SIMILARITY ---
@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    nodes: tuple[str, ...]
    values: np.ndarray
    excluded: tuple[str, ...] = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        n = len(self.nodes)
        if values.shape != (n, n):
            raise MapError(f"similarity matrix shape {values.shape} does not match {n} nodes")
        if not np.allclose(values, values.T) or (values < 0).any():
            raise MapError("similarities must be symmetric and non-negative")
        values = (values + values.T) / 2.0
        np.fill_diagonal(values, 0.0)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.nodes)

    def get(self, a: str, b: str) -> float:
        return float(self.values[self.nodes.index(a), self.nodes.index(b)])


def association_strength(g: CooccurrenceGraph) -> SimilarityMatrix:
    """s_ij = w_ij / (W_i * W_j), W_i the total weight incident to i."""
    if g.isolates:
        log.warning("%d isolated keywords excluded from the map of %s", len(g.isolates), g.label)
    nodes = tuple(sorted(g.graph))
    if not nodes:
        raise MapError(f"graph {g.label} has no edges to map")
    weights = nx.to_numpy_array(g.graph, nodelist=nodes, weight="weight")
    strength = weights.sum(axis=1)
    values = weights / np.outer(strength, strength)
    return SimilarityMatrix(nodes, values, tuple(sorted(g.isolates)))


def top_subgraph(g: CooccurrenceGraph, frequencies: Mapping[str, int], max_nodes: int) -> CooccurrenceGraph:
    """Restrict ``g`` to its ``max_nodes`` most frequent keywords (ties by name)."""
    if max_nodes < 2:
        raise MapError("a map needs at least 2 nodes")
    ranked = sorted(set(g.graph) | g.isolates, key=lambda k: (-frequencies.get(k, 0), k))
    keep = set(ranked[:max_nodes])
    sub = canonical_graph((a, b, w) for a, b, w in g.graph.edges(data="weight") if a in keep and b in keep)
    dropped = len(ranked) - len(keep)
    if dropped:
        log.info("map of %s limited to %d of %d keywords", g.label, len(keep), len(ranked))
    return CooccurrenceGraph(g.label, sub, frozenset(keep - set(sub)))


# --- LAYOUT ---
@dataclass(frozen=True, eq=False)
class MapLayout:
    nodes: tuple[str, ...]
    coords: np.ndarray
    objective: float
    iterations: int
    seed: int
    converged: bool = True
    trajectory: tuple[float, ...] = ()
    floor: float = 0.0

    @property
    def mean_distance(self) -> float:
        return float(pdist(self.coords).mean())

    def position(self, node: str) -> np.ndarray:
        return self.coords[self.nodes.index(node)]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.coords, index=pd.Index(self.nodes, name="keyword"), columns=["x", "y"])


def _normalize(x: np.ndarray) -> np.ndarray:
    x = x - x.mean(axis=0)
    scale = pdist(x).mean()
    if not scale > 0:
        raise MapError("layout collapsed to a single point")
    return x / scale


def _objective(s_condensed: np.ndarray, x: np.ndarray) -> float:
    return float(np.dot(s_condensed, pdist(x, "sqeuclidean")))


def _principal_axes(x: np.ndarray) -> np.ndarray:
    """Rotate onto principal axes; each axis flipped so its largest-magnitude coordinate is positive."""
    _, vectors = np.linalg.eigh(x.T @ x)
    x = x @ vectors[:, ::-1]
    signs = np.sign(x[np.abs(x).argmax(axis=0), range(x.shape[1])])
    signs[signs == 0] = 1.0
    return x * signs


def layout(sim: SimilarityMatrix, seed: int = 0, tol: float = 1e-9, max_iters: int = 1000) -> MapLayout:
    """Minimize sum s_ij d_ij^2 subject to mean pairwise distance 1, from a seeded random start."""
    n = len(sim)
    if n < 2:
        raise MapError("layout needs at least 2 nodes")
    s = sim.values.copy()

    # 1. Connect a disconnected similarity graph with a small floor
    floor = 0.0
    if nx.number_connected_components(nx.from_numpy_array(s)) > 1:
        positive = s[s > 0]
        floor = FLOOR_FRACTION * (positive.min() if positive.size else 1.0)
        log.warning("similarity graph is disconnected; adding floor similarity %.3g to every pair", floor)
        s = s + floor
        np.fill_diagonal(s, 0.0)

    # 2. Seeded start, then majorization steps until the objective stops falling
    laplacian = np.diag(s.sum(axis=1)) - s
    pinv = np.linalg.pinv(laplacian)
    s_condensed = squareform(s, checks=False)

    rng = np.random.default_rng(seed)
    x = _normalize(rng.standard_normal((n, 2)))
    value = _objective(s_condensed, x)
    trajectory = [value]
    converged = False
    iterations = 0
    while iterations < max_iters:
        iterations += 1
        dist = squareform(pdist(x))
        inv = np.divide(1.0, dist, out=np.zeros_like(dist), where=dist > 0)
        b = np.diag(inv.sum(axis=1)) - inv
        candidate = _normalize(pinv @ b @ x)
        new_value = _objective(s_condensed, candidate)
        if new_value >= value:
            converged = True
            break
        improvement = (value - new_value) / value if value > 0 else 0.0
        x, value = candidate, new_value
        trajectory.append(value)
        if improvement < tol:
            converged = True
            break
    if not converged:
        log.warning("layout did not converge in %d iterations (objective %.6g)", max_iters, value)

    # 3. Fix rotation and reflection
    x = _normalize(_principal_axes(x))
    return MapLayout(
        nodes=sim.nodes,
        coords=x,
        objective=_objective(s_condensed, x),
        iterations=iterations,
        seed=seed,
        converged=converged,
        trajectory=tuple(trajectory),
        floor=floor,
    )


# --- DENSITY ---
def kernel(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return np.where(u < 1.0, (1.0 - np.minimum(u, 1.0) ** 2) ** 3, 0.0)


def default_bandwidth(coords: np.ndarray) -> float:
    """Twice the mean nearest-neighbour distance."""
    if len(coords) < 2:
        return 1.0
    dist = squareform(pdist(coords))
    np.fill_diagonal(dist, np.inf)
    nearest = float(dist.min(axis=1).mean())
    return 2.0 * nearest if nearest > 0 else 1.0


@dataclass(frozen=True, eq=False)
class DensityField:
    xs: np.ndarray
    ys: np.ndarray
    scores: np.ndarray
    bandwidth: float
    peak: float
    centers: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        return float(self.xs[0]), float(self.xs[-1]), float(self.ys[0]), float(self.ys[-1])

    def raw_density(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return kernel(cdist(points, self.centers) / self.bandwidth) @ self.weights

    def score_at(self, points: np.ndarray) -> np.ndarray:
        if not self.peak > 0:
            return np.zeros(len(np.atleast_2d(points)))
        return np.clip(2.0 * self.raw_density(points) / self.peak, 0.0, 2.0)


def density_field(
    layout_: MapLayout,
    weights: Sequence[float] | None = None,
    bandwidth: float | None = None,
    grid: int = 200,
) -> DensityField:
    """Kernel density over a square grid padded by one bandwidth; scores in [0, 2].

    The peak used for scaling is the largest density over grid points and
    node positions, so a node sitting alone scores exactly 2.
    """
    centers = np.asarray(layout_.coords, dtype=float)
    w = np.ones(len(centers)) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != len(centers) or (w < 0).any():
        raise MapError("one non-negative weight per node is required")
    h = default_bandwidth(centers) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise MapError("bandwidth must be positive")
    if grid < 2:
        raise MapError("grid resolution must be at least 2")

    lo = centers.min(axis=0) - h
    hi = centers.max(axis=0) + h
    xs = np.linspace(lo[0], hi[0], grid)
    ys = np.linspace(lo[1], hi[1], grid)

    raw = np.empty((grid, grid))
    for row, y in enumerate(ys):
        points = np.column_stack([xs, np.full(grid, y)])
        raw[row] = kernel(cdist(points, centers) / h) @ w
    at_nodes = kernel(cdist(centers, centers) / h) @ w
    peak = float(max(raw.max(), at_nodes.max()))
    scores = np.clip(2.0 * raw / peak, 0.0, 2.0) if peak > 0 else np.zeros_like(raw)
    return DensityField(xs, ys, scores, h, peak, centers, w)


# --- RENDERING ---
def ramp_color(score: float) -> tuple[float, float, float]:
    """Piecewise-linear blue (0) -> green (1) -> red (2)."""
    score = min(max(float(score), 0.0), 2.0)
    stops = [s for s, _ in RAMP_STOPS]
    return tuple(float(np.interp(score, stops, [rgb[c] for _, rgb in RAMP_STOPS])) for c in range(3))


def font_sizes(prominence: Sequence[float]) -> np.ndarray:
    """Tiered font size, monotone in label prominence; zero prominence gets the smallest tier."""
    prominence = np.asarray(prominence, dtype=float)
    top = prominence.max() if prominence.size else 0.0
    if not top > 0:
        return np.full(prominence.shape, FONT_TIERS[0])
    tiers = np.minimum((np.sqrt(prominence / top) * len(FONT_TIERS)).astype(int), len(FONT_TIERS) - 1)
    tiers[prominence <= 0] = 0
    return np.asarray(FONT_TIERS)[tiers]


@dataclass(frozen=True)
class LabelPolicy:
    max_labels: int = 100
    char_width: float = 0.6
    figure_inches: float = 10.0


def label_box(center: np.ndarray, text: str, size: float, units_per_point: float, char_width: float) -> tuple:
    half_w = len(text) * size * char_width * units_per_point / 2.0
    half_h = size * units_per_point / 2.0
    return center[0] - half_w, center[1] - half_h, center[0] + half_w, center[1] + half_h


def _overlaps(a: tuple, b: tuple) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def select_labels(
    nodes: Sequence[str],
    coords: np.ndarray,
    prominence: Sequence[float],
    units_per_point: float,
    policy: LabelPolicy = LabelPolicy(),
) -> list[str]:
    """Greedy label placement: more prominent labels first, ties by name; overlapping labels are dropped."""
    sizes = font_sizes(prominence)
    order = sorted(range(len(nodes)), key=lambda i: (-prominence[i], nodes[i]))
    placed: list[tuple] = []
    chosen = []
    for i in order:
        if len(chosen) >= policy.max_labels:
            break
        box = label_box(coords[i], nodes[i], sizes[i], units_per_point, policy.char_width)
        if any(_overlaps(box, other) for other in placed):
            continue
        placed.append(box)
        chosen.append(nodes[i])
    return chosen


def units_per_point(field_: DensityField, policy: LabelPolicy) -> float:
    x0, x1, y0, y1 = field_.extent
    return max(x1 - x0, y1 - y0) / (policy.figure_inches * 72.0)


def map_highlights(
    layout_: MapLayout,
    field_: DensityField,
    prominence: Sequence[float],
    labels: Sequence[str] | None = None,
) -> list[str]:
    """Keywords in the largest font tier that sit on a red (score >= 1.5) neighbourhood."""
    sizes = font_sizes(prominence)
    scores = field_.score_at(layout_.coords)
    allowed = set(layout_.nodes if labels is None else labels)
    picked = [
        i
        for i, node in enumerate(layout_.nodes)
        if node in allowed and sizes[i] == sizes.max() and scores[i] >= HIGHLIGHT_SCORE
    ]
    return [layout_.nodes[i] for i in sorted(picked, key=lambda i: (-prominence[i], layout_.nodes[i]))]


def map_data(
    layout_: MapLayout,
    field_: DensityField,
    prominence: Sequence[float],
    labels: Sequence[str],
    meta: Mapping[str, Any] | None = None,
) -> dict[str, Any]:
    sizes = font_sizes(prominence)
    scores = field_.score_at(layout_.coords)
    shown = set(labels)
    return {
        "meta": dict(meta or {}),
        "similarity": SIMILARITY,
        "kernel": KERNEL,
        "seed": layout_.seed,
        "objective": layout_.objective,
        "iterations": layout_.iterations,
        "converged": layout_.converged,
        "floor_similarity": layout_.floor,
        "trajectory": list(layout_.trajectory),
        "bandwidth": field_.bandwidth,
        "nodes": [
            {
                "keyword": node,
                "x": float(layout_.coords[i, 0]),
                "y": float(layout_.coords[i, 1]),
                "weight": float(field_.weights[i]),
                "prominence": float(prominence[i]),
                "font_size": float(sizes[i]),
                "score": float(scores[i]),
                "labelled": node in shown,
            }
            for i, node in enumerate(layout_.nodes)
        ],
        "grid": {"xs": field_.xs, "ys": field_.ys, "scores": field_.scores},
    }


def render_map(
    layout_: MapLayout,
    field_: DensityField,
    prominence: Sequence[float],
    svg_path: str | Path,
    data_path: str | Path,
    policy: LabelPolicy = LabelPolicy(),
    meta: Mapping[str, Any] | None = None,
) -> tuple[Path, Path]:
    """Write the SVG map and its JSON sidecar; returns both paths."""
    if len(field_.centers) != len(layout_.nodes):
        raise MapError("layout and density field cover different node sets")
    labels = select_labels(layout_.nodes, layout_.coords, prominence, units_per_point(field_, policy), policy)
    sizes = font_sizes(prominence)

    with plt.rc_context({"svg.hashsalt": SVG_HASHSALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(policy.figure_inches, policy.figure_inches))
        ax.imshow(field_.scores, origin="lower", extent=field_.extent, cmap=RAMP, vmin=0.0, vmax=2.0,
                  interpolation="bilinear", aspect="equal")
        ax.scatter(layout_.coords[:, 0], layout_.coords[:, 1], s=4, c="white", linewidths=0)
        for i, node in enumerate(layout_.nodes):
            if node in labels:
                x, y = layout_.coords[i]
                ax.text(x, y, node, fontsize=sizes[i], ha="center", va="center", color="black")
        ax.set_axis_off()
        fig.tight_layout(pad=0)
        with atomic_path(svg_path) as tmp:
            fig.savefig(tmp, format="svg", metadata={"Date": None, "Description": metadata_text(meta) or None})
        plt.close(fig)

    write_json(map_data(layout_, field_, prominence, labels, meta), data_path)
    return Path(svg_path), Path(data_path)


def build_map(
    g: CooccurrenceGraph,
    frequencies: Mapping[str, int],
    seed: int = 0,
    max_nodes: int = 300,
    tol: float = 1e-9,
    max_iters: int = 1000,
    bandwidth: float | None = None,
    grid: int = 200,
) -> tuple[SimilarityMatrix, MapLayout, DensityField, np.ndarray]:
    """Similarity, layout and density for the most frequent keywords of ``g``; also returns label prominence."""
    # 1. Most frequent keywords and their similarities
    sub = top_subgraph(g, frequencies, max_nodes)
    sim = association_strength(sub)
    # 2. Layout and density background
    placed = layout(sim, seed=seed, tol=tol, max_iters=max_iters)
    weights = [frequencies.get(node, 0) for node in placed.nodes]
    field_ = density_field(placed, weights, bandwidth=bandwidth, grid=grid)
    # 3. Label prominence: geometric mean of link count and total link weight
    degree = np.array([sub.graph.degree(node) if node in sub.graph else 0 for node in placed.nodes], dtype=float)
    strength = np.array([sub.strength(node) for node in placed.nodes], dtype=float)
    prominence = np.sqrt(degree * strength)
    log.info("map of %s: %d nodes, %d iterations, objective %.6g", g.label, len(placed.nodes), placed.iterations, placed.objective)
    return sim, placed, field_, prominence
