"""Loss terms: dot-product discriminator, Jensen-Shannon intra-space MI
estimator, non-parameterized and parameterized inter-space CLUB penalties,
and the combined objectives.

All losses are means over batch/groups/pairs so the diversity weight and the
learning rate stay independent of batch size and group count.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import tensor as T
from .encoder import glorot_uniform
from .tensor import ContractError, DimensionError, Tensor


@dataclass(frozen=True)
class LossBreakdown:
    intra_positive: float
    intra_negative: float
    inter_penalty: float
    weight: float
    total: float

    def __post_init__(self):
        expected = self.intra_positive + self.intra_negative + self.weight * self.inter_penalty
        if abs(self.total - expected) > 1e-12:
            raise ContractError("loss breakdown does not sum to total")


def _const(x) -> Tensor:
    """Detach: value-only copy with no tape attachment."""
    return Tensor(x.values if isinstance(x, Tensor) else x)


def discriminator(u, r) -> float:
    """Agreement score of two representations: their inner product."""
    uv = np.asarray(u.values if isinstance(u, Tensor) else u, dtype=np.float64).reshape(-1)
    rv = np.asarray(r.values if isinstance(r, Tensor) else r, dtype=np.float64).reshape(-1)
    if uv.shape != rv.shape:
        raise DimensionError(f"discriminator: dims {uv.shape} vs {rv.shape}")
    return float(uv @ rv)


def _check_groups(u_groups: Sequence[Tensor], r_groups: Sequence[Tensor]):
    if len(u_groups) != len(r_groups):
        raise ContractError("views carry different group counts")
    b = u_groups[0].shape[0]
    for g in list(u_groups) + list(r_groups):
        if g.shape[0] != b:
            raise ContractError("group tensors carry different batch sizes")
    return b


def js_terms(u_groups: Sequence[Tensor], r_groups: Sequence[Tensor]) -> tuple[Tensor, Tensor]:
    """Positive and negative halves of the JS MI loss, each as a scalar mean.

    Positive pairs are same-graph same-group across views; negative pairs are
    all off-diagonal same-group cross-view pairs in the batch.
    """
    b = _check_groups(u_groups, r_groups)
    if b < 2:
        raise ContractError("JS loss needs a batch of at least 2 graphs for negatives")
    p = len(u_groups)
    eye = Tensor(np.eye(b))
    off = Tensor(1.0 - np.eye(b))
    pos_sum = None
    neg_sum = None
    for uk, rk in zip(u_groups, r_groups):
        scores = T.matmul(uk, T.transpose(rk))
        pos_k = T.tsum(T.mul(T.softplus(T.neg(scores)), eye))
        neg_k = T.tsum(T.mul(T.softplus(scores), off))
        pos_sum = pos_k if pos_sum is None else T.add(pos_sum, pos_k)
        neg_sum = neg_k if neg_sum is None else T.add(neg_sum, neg_k)
    pos = T.smul(pos_sum, 1.0 / (p * b))
    neg = T.smul(neg_sum, 1.0 / (p * b * (b - 1)))
    return pos, neg


def js_mi_loss(u_groups: Sequence[Tensor], r_groups: Sequence[Tensor]) -> Tensor:
    """Loss whose minimization maximizes the JS estimator of intra-space MI."""
    pos, neg = js_terms(u_groups, r_groups)
    return T.add(pos, neg)


def js_terms_nodewise(
    u_groups: Sequence[Tensor],
    r_nodes: Tensor,
    segments: Sequence[tuple[int, int]],
) -> tuple[Tensor, Tensor]:
    """JS terms with node-level partners: positives pair a graph's group
    embedding with its own nodes, negatives with all other graphs' nodes."""
    b = u_groups[0].shape[0]
    n = r_nodes.shape[0]
    if b < 2:
        raise ContractError("node-wise JS loss needs at least 2 graphs")
    member = np.zeros((b, n))
    for g, (lo, hi) in enumerate(segments):
        member[g, lo:hi] = 1.0
    n_pos = int(member.sum())
    n_neg = b * n - n_pos
    pos_mask = Tensor(member)
    neg_mask = Tensor(1.0 - member)
    p = len(u_groups)
    pos_sum = None
    neg_sum = None
    for uk in u_groups:
        scores = T.matmul(uk, T.transpose(r_nodes))
        pos_k = T.tsum(T.mul(T.softplus(T.neg(scores)), pos_mask))
        neg_k = T.tsum(T.mul(T.softplus(scores), neg_mask))
        pos_sum = pos_k if pos_sum is None else T.add(pos_sum, pos_k)
        neg_sum = neg_k if neg_sum is None else T.add(neg_sum, neg_k)
    pos = T.smul(pos_sum, 1.0 / (p * n_pos))
    neg = T.smul(neg_sum, 1.0 / (p * n_neg))
    return pos, neg


def interspace_penalty_nonparam(u_groups: Sequence[Tensor]) -> Tensor:
    """Mean over graphs and unordered group pairs of SP(dot of the two
    group embeddings); the joint term of the simplified CLUB bound."""
    p = len(u_groups)
    if p < 2:
        warnings.warn("inter-space penalty needs at least 2 groups; returning 0")
        return Tensor(0.0)
    b = u_groups[0].shape[0]
    total = None
    n_pairs = 0
    for k in range(p):
        for l in range(k + 1, p):
            dots = T.tsum(T.mul(u_groups[k], u_groups[l]), axis=1)
            s = T.tsum(T.softplus(dots))
            total = s if total is None else T.add(total, s)
            n_pairs += 1
    return T.smul(total, 1.0 / (n_pairs * b))


def init_varnet_params(rng: np.random.Generator, dim: int, prefix: str = "var") -> dict[str, np.ndarray]:
    """Two two-layer MLPs (dim -> dim) producing the conditional mean and the
    per-dimension log-variance."""
    params = {}
    for net in ("mu", "lv"):
        params[f"{prefix}.{net}.w1"] = glorot_uniform(rng, dim, dim)
        params[f"{prefix}.{net}.b1"] = np.zeros(dim)
        params[f"{prefix}.{net}.w2"] = glorot_uniform(rng, dim, dim)
        params[f"{prefix}.{net}.b2"] = np.zeros(dim)
    return params


def _varnet_forward(x: Tensor, params: Mapping, net: str, prefix: str = "var") -> Tensor:
    def pick(name):
        val = params[f"{prefix}.{net}.{name}"]
        return val if isinstance(val, Tensor) else Tensor(val)

    hidden = T.relu(T.add(T.matmul(x, pick("w1")), pick("b1")))
    return T.add(T.matmul(hidden, pick("w2")), pick("b2"))


def _club_expression(
    u_groups: Sequence[Tensor],
    var_params: Mapping,
    prefix: str = "var",
) -> Tensor:
    """Mean over graphs and ordered group pairs (k != l) of
    sum_i(-lv_i - (u^(l)_i - mu_i)^2 / exp(lv_i))."""
    p = len(u_groups)
    if p < 2:
        raise ContractError("parameterized CLUB needs at least 2 groups")
    b = u_groups[0].shape[0]
    total = None
    n_pairs = 0
    for k in range(p):
        mu = _varnet_forward(u_groups[k], var_params, "mu", prefix)
        lv = _varnet_forward(u_groups[k], var_params, "lv", prefix)
        inv_var = T.exp(T.neg(lv))
        for l in range(p):
            if l == k:
                continue
            resid = T.square(T.sub(u_groups[l], mu))
            per_graph = T.tsum(T.add(T.neg(lv), T.neg(T.mul(resid, inv_var))), axis=1)
            s = T.tsum(per_graph)
            total = s if total is None else T.add(total, s)
            n_pairs += 1
    return T.smul(total, 1.0 / (n_pairs * b))


def club_param_penalty(u_groups: Sequence[Tensor], var_params: Mapping) -> Tensor:
    """Parameterized CLUB penalty; gradients reach encoder parameters only
    (the variational nets are treated as constants here)."""
    detached = {k: _const(v) for k, v in var_params.items()}
    return _club_expression(u_groups, detached)


def varnet_likelihood_loss(u_groups: Sequence[Tensor], var_params: Mapping) -> Tensor:
    """Negative conditional log-likelihood; gradients reach the variational
    nets only (embeddings are treated as constants here)."""
    detached_groups = [_const(g) for g in u_groups]
    return T.neg(_club_expression(detached_groups, var_params))


def combine_terms(pos: Tensor, neg: Tensor, inter: Tensor, weight: float) -> tuple[Tensor, LossBreakdown]:
    if weight < 0:
        raise ContractError("diversity weight must be non-negative")
    total = T.add(T.add(pos, neg), T.smul(inter, weight))
    breakdown = LossBreakdown(
        intra_positive=pos.item(),
        intra_negative=neg.item(),
        inter_penalty=inter.item(),
        weight=weight,
        total=total.item(),
    )
    return total, breakdown


def total_loss_nonparam(
    u_groups: Sequence[Tensor],
    r_groups: Sequence[Tensor],
    weight: float,
) -> tuple[Tensor, LossBreakdown]:
    pos, neg = js_terms(u_groups, r_groups)
    inter = interspace_penalty_nonparam(u_groups) if weight > 0 else Tensor(0.0)
    return combine_terms(pos, neg, inter, weight)


def total_loss_param(
    u_groups: Sequence[Tensor],
    r_groups: Sequence[Tensor],
    weight: float,
    var_params: Mapping,
) -> tuple[Tensor, LossBreakdown]:
    pos, neg = js_terms(u_groups, r_groups)
    inter = club_param_penalty(u_groups, var_params) if weight > 0 else Tensor(0.0)
    return combine_terms(pos, neg, inter, weight)
