"""Graph/dataset types, a line-delimited file format, a synthetic
planted-motif generator, and block-segment batching."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .seeding import stream_rng


class GraphError(ValueError):
    pass


class DatasetFormatError(ValueError):
    """Malformed dataset record; message carries the 1-based line number."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph with dense node features and an optional class label.

    Edges are stored once per undirected pair; self-loops are not stored
    (the self term is added inside GIN aggregation).
    """

    num_nodes: int
    node_features: np.ndarray
    edges: tuple[tuple[int, int], ...]
    label: int | None = None

    def __post_init__(self):
        if self.num_nodes <= 0:
            raise GraphError("graph must have at least one node")
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise GraphError(
                f"feature matrix shape {feats.shape} does not match {self.num_nodes} nodes")
        if not np.all(np.isfinite(feats)):
            raise GraphError("node features hold non-finite values")
        object.__setattr__(self, "node_features", feats)
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        seen = set()
        for u, v in edges:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise GraphError(f"edge ({u}, {v}) out of range for {self.num_nodes} nodes")
            if u == v:
                raise GraphError(f"explicit self-loop on node {u}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate undirected edge ({u}, {v})")
            seen.add(key)
        object.__setattr__(self, "edges", edges)

    @property
    def feature_dim(self) -> int:
        return self.node_features.shape[1]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def neighbors(self, v: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == v:
                out.append(b)
            elif b == v:
                out.append(a)
        return sorted(out)


@dataclass(frozen=True)
class Dataset:
    graphs: tuple[Graph, ...]
    feature_dim: int
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        for g in self.graphs:
            if g.feature_dim != self.feature_dim:
                raise GraphError(
                    f"graph feature dim {g.feature_dim} != dataset dim {self.feature_dim}")
            if g.label is not None and not (0 <= g.label < max(self.num_classes, 1)):
                raise GraphError(f"label {g.label} outside [0, {self.num_classes})")

    def __len__(self):
        return len(self.graphs)


@dataclass(frozen=True)
class Batch:
    """Graphs stacked into one node block with per-graph segment ranges."""

    features: np.ndarray                     # (total_nodes, d)
    edges: tuple[tuple[int, int], ...]       # offset-shifted indices
    segments: tuple[tuple[int, int], ...]    # [start, end) per graph, in order
    labels: tuple[int | None, ...]

    @property
    def num_graphs(self) -> int:
        return len(self.segments)

    @property
    def total_nodes(self) -> int:
        return self.features.shape[0]

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.total_nodes, self.total_nodes))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def segment_indicator(self) -> np.ndarray:
        """(num_graphs, total_nodes) 0/1 matrix; row g selects graph g's nodes."""
        s = np.zeros((self.num_graphs, self.total_nodes))
        for g, (lo, hi) in enumerate(self.segments):
            s[g, lo:hi] = 1.0
        return s


def batch_graphs(graphs: list[Graph]) -> Batch:
    if not graphs:
        raise GraphError("cannot batch an empty graph list")
    d = graphs[0].feature_dim
    for g in graphs:
        if g.feature_dim != d:
            raise GraphError("mixed feature dimensions in batch")
    features = np.concatenate([g.node_features for g in graphs], axis=0)
    edges: list[tuple[int, int]] = []
    segments: list[tuple[int, int]] = []
    offset = 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges)
        segments.append((offset, offset + g.num_nodes))
        offset += g.num_nodes
    return Batch(
        features=features,
        edges=tuple(edges),
        segments=tuple(segments),
        labels=tuple(g.label for g in graphs),
    )


def unbatch_graphs(batch: Batch) -> list[Graph]:
    out = []
    for g, (lo, hi) in enumerate(batch.segments):
        edges = tuple(
            (u - lo, v - lo) for u, v in batch.edges if lo <= u < hi and lo <= v < hi)
        out.append(Graph(
            num_nodes=hi - lo,
            node_features=batch.features[lo:hi].copy(),
            edges=edges,
            label=batch.labels[g],
        ))
    return out


# ---------------------------------------------------------------------------
# file format: one JSON object per line with fields n, x (row-major), e
# (flat endpoint pairs), optional y


def graph_to_record(g: Graph) -> str:
    rec = {
        "n": g.num_nodes,
        "x": [float(v) for v in g.node_features.reshape(-1)],
        "e": [int(i) for uv in g.edges for i in uv],
    }
    if g.label is not None:
        rec["y"] = int(g.label)
    return json.dumps(rec, separators=(",", ":"))


def save_dataset(path, dataset: Dataset) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for g in dataset.graphs:
            f.write(graph_to_record(g) + "\n")


def load_dataset(path) -> Dataset:
    graphs: list[Graph] = []
    feature_dim: int | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"line {lineno}: invalid record: {exc}") from exc
            if not isinstance(rec, dict) or "n" not in rec or "x" not in rec or "e" not in rec:
                raise DatasetFormatError(f"line {lineno}: record must carry fields n, x, e")
            n = rec["n"]
            if not isinstance(n, int) or n <= 0:
                raise DatasetFormatError(f"line {lineno}: invalid node count {n!r}")
            x = rec["x"]
            if not isinstance(x, list) or len(x) % n != 0:
                raise DatasetFormatError(
                    f"line {lineno}: feature list length {len(x) if isinstance(x, list) else '?'} "
                    f"not divisible by {n} nodes")
            d = len(x) // n
            if feature_dim is None:
                feature_dim = d
            elif d != feature_dim:
                raise DatasetFormatError(
                    f"line {lineno}: feature dim {d} differs from earlier dim {feature_dim}")
            e = rec["e"]
            if not isinstance(e, list) or len(e) % 2 != 0:
                raise DatasetFormatError(f"line {lineno}: edge list must hold endpoint pairs")
            edges = tuple((e[i], e[i + 1]) for i in range(0, len(e), 2))
            label = rec.get("y")
            if label is not None and not isinstance(label, int):
                raise DatasetFormatError(f"line {lineno}: label must be an integer")
            try:
                g = Graph(
                    num_nodes=n,
                    node_features=np.asarray(x, dtype=np.float64).reshape(n, d),
                    edges=edges,
                    label=label,
                )
            except (GraphError, ValueError) as exc:
                raise DatasetFormatError(f"line {lineno}: {exc}") from exc
            graphs.append(g)
    if not graphs:
        return Dataset(graphs=(), feature_dim=0, num_classes=0)
    labels = [g.label for g in graphs if g.label is not None]
    num_classes = (max(labels) + 1) if labels else 0
    return Dataset(graphs=tuple(graphs), feature_dim=feature_dim, num_classes=num_classes)


# ---------------------------------------------------------------------------
# synthetic planted-motif generator

_BACKGROUND_DENSITY = 0.15
_NOISE_SIGMA = 0.01


def generate_planted_motif_dataset(
    seed: int, num_graphs: int, nodes_per_graph: int, feature_dim: int,
) -> Dataset:
    """Two balanced classes of random graphs: class 0 carries a planted
    4-clique, class 1 a planted 6-cycle. Features are one-hot degree buckets
    (capped) plus small seeded Gaussian noise. Deterministic given seed."""
    if num_graphs % 2 != 0:
        raise GraphError("num_graphs must be even")
    if nodes_per_graph < 8:
        raise GraphError("nodes_per_graph must be at least 8")
    if feature_dim < 4:
        raise GraphError("feature_dim must be at least 4")
    rng = stream_rng(seed, "data")
    graphs = []
    for i in range(num_graphs):
        label = i % 2
        n = nodes_per_graph
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
        num_background = int(round(_BACKGROUND_DENSITY * len(pairs)))
        chosen = rng.choice(len(pairs), size=num_background, replace=False)
        edge_set: set[tuple[int, int]] = {pairs[j] for j in chosen}
        motif_size = 4 if label == 0 else 6
        motif = sorted(rng.choice(n, size=motif_size, replace=False).tolist())
        if label == 0:
            for a in range(motif_size):
                for b in range(a + 1, motif_size):
                    edge_set.add((motif[a], motif[b]))
        else:
            # the cycle is planted as an induced subgraph: background chords
            # between motif nodes are removed so the motif really is a 6-cycle
            ring = list(motif)
            for a in range(motif_size):
                for b in range(a + 1, motif_size):
                    edge_set.discard((motif[a], motif[b]))
            for a in range(motif_size):
                u, v = ring[a], ring[(a + 1) % motif_size]
                edge_set.add((min(u, v), max(u, v)))
        edges = tuple(sorted(edge_set))
        degree = np.zeros(n, dtype=int)
        for u, v in edges:
            degree[u] += 1
            degree[v] += 1
        feats = np.zeros((n, feature_dim))
        for v in range(n):
            feats[v, min(degree[v], feature_dim - 1)] = 1.0
        feats += rng.normal(0.0, _NOISE_SIGMA, size=feats.shape)
        graphs.append(Graph(num_nodes=n, node_features=feats, edges=edges, label=label))
    return Dataset(graphs=tuple(graphs), feature_dim=feature_dim, num_classes=2)


def split_dataset(
    dataset: Dataset,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle then contiguous train/validation/test split."""
    if any(f <= 0 for f in fractions):
        raise GraphError("split fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise GraphError(f"split fractions must sum to 1, got {sum(fractions)}")
    n = len(dataset)
    order = stream_rng(seed, "split").permutation(n)
    n_train = int(n * fractions[0])
    n_val = int(n * fractions[1])
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise GraphError("every split must be non-empty")
    shuffled = [dataset.graphs[i] for i in order]
    parts = (
        shuffled[:n_train],
        shuffled[n_train:n_train + n_val],
        shuffled[n_train + n_val:],
    )
    return tuple(
        Dataset(graphs=tuple(p), feature_dim=dataset.feature_dim,
                num_classes=dataset.num_classes)
        for p in parts
    )


def split_class_counts(split: Dataset, num_classes: int) -> list[int]:
    counts = [0] * num_classes
    for g in split.graphs:
        if g.label is not None:
            counts[g.label] += 1
    return counts
