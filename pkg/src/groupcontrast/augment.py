"""Stochastic graph view generation for the augmented-view pipeline."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, GraphError

AUGMENTATION_KINDS = ("node-drop", "edge-perturb", "attribute-mask", "subgraph")


@dataclass(frozen=True)
class AugmentationPolicy:
    kinds: tuple[str, ...] = ("node-drop", "attribute-mask")
    ratio: float = 0.2

    def __post_init__(self):
        if not self.kinds:
            raise GraphError("augmentation policy needs at least one kind")
        for k in self.kinds:
            if k not in AUGMENTATION_KINDS:
                raise GraphError(f"unknown augmentation kind {k!r}")
        if not (0.0 <= self.ratio < 1.0):
            raise GraphError(f"augmentation ratio must lie in [0, 1), got {self.ratio}")


def node_drop(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Drop floor(ratio*N) uniform nodes; survivors keep their relative order."""
    k = int(ratio * g.num_nodes)
    if k >= g.num_nodes:
        raise GraphError("node_drop would remove every node")
    if k == 0:
        return g
    dropped = set(rng.choice(g.num_nodes, size=k, replace=False).tolist())
    kept = [v for v in range(g.num_nodes) if v not in dropped]
    remap = {old: new for new, old in enumerate(kept)}
    edges = tuple(
        (remap[u], remap[v]) for u, v in g.edges if u not in dropped and v not in dropped)
    return Graph(
        num_nodes=len(kept),
        node_features=g.node_features[kept].copy(),
        edges=edges,
        label=g.label,
    )


def edge_perturb(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Remove floor(ratio*|E|) uniform edges and add as many uniform
    non-edges of the original graph (fewer if the graph is near-complete)."""
    if not g.edges:
        raise GraphError("edge_perturb requires at least one edge")
    k = int(ratio * len(g.edges))
    if k == 0:
        return g
    removed = set(rng.choice(len(g.edges), size=k, replace=False).tolist())
    edges = [e for i, e in enumerate(g.edges) if i not in removed]
    existing = {(min(u, v), max(u, v)) for u, v in g.edges}
    non_edges = [
        (u, v)
        for u in range(g.num_nodes)
        for v in range(u + 1, g.num_nodes)
        if (u, v) not in existing
    ]
    n_add = min(k, len(non_edges))
    if n_add:
        added = rng.choice(len(non_edges), size=n_add, replace=False)
        edges.extend(non_edges[i] for i in sorted(added.tolist()))
    return Graph(
        num_nodes=g.num_nodes,
        node_features=g.node_features.copy(),
        edges=tuple(edges),
        label=g.label,
    )


def attribute_mask(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Zero the feature rows of floor(ratio*N) uniform nodes; structure kept."""
    k = int(ratio * g.num_nodes)
    if k == 0:
        return g
    masked = rng.choice(g.num_nodes, size=k, replace=False)
    feats = g.node_features.copy()
    feats[masked] = 0.0
    return Graph(num_nodes=g.num_nodes, node_features=feats, edges=g.edges, label=g.label)


def subgraph_sample(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Random-walk-grown node subset of size ceil((1-ratio)*N); returns the
    induced subgraph. Connected inputs yield connected outputs."""
    if g.num_nodes < 2:
        raise GraphError("subgraph_sample requires at least two nodes")
    target = int(np.ceil((1.0 - ratio) * g.num_nodes))
    target = max(target, 1)
    adj = {v: g.neighbors(v) for v in range(g.num_nodes)}
    current = int(rng.integers(g.num_nodes))
    kept = {current}
    while len(kept) < target:
        candidates = [u for u in adj[current] if u not in kept]
        if candidates:
            current = candidates[int(rng.integers(len(candidates)))]
            kept.add(current)
            continue
        # stuck: restart from a kept node with an unkept neighbor
        frontier = [v for v in kept if any(u not in kept for u in adj[v])]
        if frontier:
            current = frontier[int(rng.integers(len(frontier)))]
        else:
            # kept component exhausted (disconnected input): jump outside
            outside = [v for v in range(g.num_nodes) if v not in kept]
            current = outside[int(rng.integers(len(outside)))]
            kept.add(current)
    kept_sorted = sorted(kept)
    remap = {old: new for new, old in enumerate(kept_sorted)}
    edges = tuple(
        (remap[u], remap[v]) for u, v in g.edges if u in kept and v in kept)
    return Graph(
        num_nodes=len(kept_sorted),
        node_features=g.node_features[kept_sorted].copy(),
        edges=edges,
        label=g.label,
    )


_KIND_FNS = {
    "node-drop": node_drop,
    "edge-perturb": edge_perturb,
    "attribute-mask": attribute_mask,
    "subgraph": subgraph_sample,
}


def sample_view(g: Graph, policy: AugmentationPolicy, rng: np.random.Generator) -> Graph:
    """Uniformly pick one enabled kind and apply it with the policy ratio."""
    kind = policy.kinds[int(rng.integers(len(policy.kinds)))]
    return _KIND_FNS[kind](g, policy.ratio, rng)
