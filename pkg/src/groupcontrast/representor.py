"""Attention-based representor: project node embeddings to key/value,
attend with learned queries, emit one graph-level embedding per group."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import tensor as T
from .encoder import glorot_uniform
from .graphs import Batch
from .tensor import DimensionError, Tensor


@dataclass(frozen=True)
class GroupEmbeddings:
    """Concrete per-graph group vectors plus the attention used to form them."""

    groups: np.ndarray                      # (num_graphs, p, group_dim)
    attention: tuple[np.ndarray, ...]       # per graph: (n_g, p)

    @property
    def num_groups(self) -> int:
        return self.groups.shape[1]

    @property
    def group_dim(self) -> int:
        return self.groups.shape[2]


def init_representor_params(
    rng: np.random.Generator,
    node_dim: int,
    key_dim: int,
    group_dim: int,
    num_groups: int,
    prefix: str = "rep",
) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.wk": glorot_uniform(rng, node_dim, key_dim),
        f"{prefix}.wv": glorot_uniform(rng, node_dim, group_dim),
        # queries scaled to keep initial attention scores O(1)
        f"{prefix}.q": rng.standard_normal((key_dim, num_groups)) / np.sqrt(key_dim),
    }


def project_kv(u: Tensor, wk: Tensor, wv: Tensor) -> tuple[Tensor, Tensor]:
    return T.matmul(u, wk), T.matmul(u, wv)


def attention(
    k: Tensor,
    q: Tensor,
    segments: list[tuple[int, int]],
    scale_scores: bool = False,
) -> Tensor:
    """Scores KQ normalized along each graph's node dimension, per column."""
    if k.shape[1] != q.shape[0]:
        raise DimensionError(f"attention: key width {k.shape[1]} != query rows {q.shape[0]}")
    scores = T.matmul(k, q)
    if scale_scores:
        scores = T.smul(scores, 1.0 / np.sqrt(k.shape[1]))
    return T.segment_softmax(scores, segments)


def group_embed(v: Tensor, a: Tensor, batch: Batch) -> list[Tensor]:
    """Attention-weighted sums of value rows per graph, one tensor per group.

    Each group vector is L2-normalized, so discriminator scores are bounded.
    """
    indicator = Tensor(batch.segment_indicator())
    p = a.shape[1]
    groups = []
    for k in range(p):
        weights = T.slice_cols(a, k, k + 1)           # (N, 1)
        weighted = T.mul(v, weights)
        pooled = T.matmul(indicator, weighted)        # (num_graphs, group_dim)
        groups.append(T.row_l2_normalize(pooled))
    return groups


def concat_groups(groups: list[Tensor]) -> Tensor:
    """Concatenate group vectors in group order: (num_graphs, p * group_dim)."""
    return T.concat(groups, axis=1)


def duplicate_rep(r: np.ndarray, p: int) -> list[np.ndarray]:
    """p value-independent copies of one representation."""
    if p < 1:
        raise DimensionError("duplicate_rep: p must be at least 1")
    arr = np.asarray(r, dtype=np.float64)
    return [arr.copy() for _ in range(p)]


def forward_groups(
    batch: Batch,
    node_embeddings: Tensor,
    params: Mapping[str, Tensor],
    scale_scores: bool = False,
    prefix: str = "rep",
) -> tuple[list[Tensor], Tensor]:
    """Full representor pass; returns group tensors and the attention matrix."""
    k, v = project_kv(node_embeddings, params[f"{prefix}.wk"], params[f"{prefix}.wv"])
    a = attention(k, params[f"{prefix}.q"], list(batch.segments), scale_scores)
    return group_embed(v, a, batch), a


def embeddings_from_forward(groups: list[Tensor], a: Tensor, batch: Batch) -> GroupEmbeddings:
    stacked = np.stack([g.values for g in groups], axis=1)
    att = tuple(a.values[lo:hi].copy() for lo, hi in batch.segments)
    return GroupEmbeddings(groups=stacked, attention=att)
