"""Training objectives: supervised BCE, the contrastive two-view loss
(alignment + uniformity + supervision), and the reparameterized
soft-edge-selection loss with information constraints. Standard training,
the basic information-bottleneck objective, and DropEdge are degenerate
configurations of the same two entry points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import augment
from . import autodiff as ad
from .encoders import ModelParams, edge_logits, edge_representations, encode
from .noise import NoisySplit

MODES = ("standard", "gib", "dropedge", "rgib_ssl", "rgib_rep")


@dataclass
class ObjectiveConfig:
    mode: str = "standard"
    lambda_s: float = 1.0
    lambda_a: float = 1.0
    lambda_u: float = 1.0
    lambda_A: float = 1.0
    lambda_Y: float = 1.0
    gamma: float = 1.0          # margin of the negative alignment term
    alpha_shift: float = 1.0    # shift inside the negative softmax weights
    tau: float = 0.7            # constant prior of the constraint penalty
    unif_pairs: int = 512       # cap on sampled pos/neg pairs for uniformity
    dropedge_p: float = 0.2
    aug_ops: int = 1            # stages per sampled augmentation operator
    rep_selection: bool = True  # False pins all selection weights to 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode: {self.mode}")
        for name in ("lambda_s", "lambda_a", "lambda_u", "lambda_A", "lambda_Y"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie in (0, 1)")
        if not (0.0 <= self.dropedge_p < 1.0):
            raise ValueError("dropedge_p must lie in [0, 1)")


@dataclass
class ReparamState:
    """Edge-confidence probabilities of the shared-weight sampler."""

    p_obs: ad.Tensor    # (|obs edges|, 1), in (0,1)
    p_query: ad.Tensor  # (|train queries|, 1), in (0,1)
    query_labels: np.ndarray

    def hard_masks(self, rng):
        """Bernoulli draws used only for reporting selection sizes."""
        keep_obs = rng.random(self.p_obs.rows) < self.p_obs.value[:, 0]
        pos = self.query_labels == 1
        keep_y = (rng.random(self.p_query.rows) < self.p_query.value[:, 0]) & pos
        return keep_obs, keep_y


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def bce_loss(logits: ad.Tensor, labels, sample_weights: ad.Tensor | None = None) -> ad.Tensor:
    """Mean binary cross-entropy of logits against 0/1 labels.

    Optional per-sample weights multiply each term before the mean; the
    divisor stays the sample count so all-ones weights reproduce the
    unweighted loss exactly.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
    if y.shape[0] != logits.rows or logits.cols != 1:
        raise ad.ShapeError("bce_loss: logits (N,1) and labels length N required")
    s = ad.sigmoid(logits)
    one = ad.constant(np.ones_like(y))
    y_c = ad.constant(y)
    per = ad.scale(
        ad.add(ad.mul(y_c, ad.log(s)), ad.mul(ad.sub(one, y_c), ad.log(ad.sub(one, s)))),
        -1.0,
    )
    if sample_weights is not None:
        per = ad.mul(per, sample_weights)
    return ad.mean(per)


def alignment_loss(h1: ad.Tensor, h2: ad.Tensor, rng, gamma=1.0, alpha_shift=1.0) -> ad.Tensor:
    """Self-adversarial two-view alignment.

    Positive part: softmax-weighted squared distances between matching
    rows. Negative part: softmax-weighted margin terms against one
    mismatched partner per row. Both softmax weight vectors are computed
    from values only and enter as constants.
    """
    if h1.shape != h2.shape:
        raise ad.ShapeError("alignment_loss: view shapes differ")
    n = h1.rows
    if n < 2:
        raise ValueError("alignment_loss needs at least 2 rows to sample negatives")
    d_pos = ad.sum(ad.square(ad.sub(h1, h2)), axis=1)
    p_pos = _softmax(d_pos.value[:, 0])
    r_pos = ad.sum(ad.scale_rows(d_pos, p_pos))
    neg_idx = (np.arange(n) + 1 + rng.integers(n - 1, size=n)) % n
    d_neg = ad.sum(ad.square(ad.sub(h1, ad.gather_rows(h2, neg_idx))), axis=1)
    p_neg = _softmax(alpha_shift - d_neg.value[:, 0])
    margin = ad.sub(ad.constant(np.full((n, 1), gamma)), d_neg)
    r_neg = ad.sum(ad.scale_rows(margin, p_neg))
    return ad.add(r_pos, r_neg)


def uniformity_loss(h1: ad.Tensor, h2: ad.Tensor, pos_idx, neg_idx) -> ad.Tensor:
    """Gaussian-kernel energy over sampled positive/negative row pairs.

    Rows are unit-normalized first; each pair contributes one kernel term
    per view, so K identical rows give a loss of exactly 2K.
    """
    pos_idx = np.asarray(pos_idx, dtype=np.int64)
    neg_idx = np.asarray(neg_idx, dtype=np.int64)
    if pos_idx.size == 0 or neg_idx.size == 0 or pos_idx.size != neg_idx.size:
        raise ValueError("uniformity_loss needs aligned, non-empty pair indices")
    total = None
    for h in (h1, h2):
        hn = ad.row_normalize(h)
        d = ad.sum(ad.square(ad.sub(ad.gather_rows(hn, pos_idx), ad.gather_rows(hn, neg_idx))), axis=1)
        term = ad.sum(ad.exp(ad.scale(d, -1.0)))
        total = term if total is None else ad.add(total, term)
    return total


def supervised_loss(params: ModelParams, edges, x, queries, labels,
                    edge_weights=None, sample_weights=None) -> ad.Tensor:
    """Encode, read out query logits, and take the BCE."""
    u = encode(params, edges, x, edge_weights=edge_weights)
    return bce_loss(edge_logits(u, queries), labels, sample_weights=sample_weights)


def _train_queries(noisy: NoisySplit):
    edges = [e for e, _ in noisy.train_query_noisy]
    labels = np.asarray([y for _, y in noisy.train_query_noisy], dtype=np.float64)
    return edges, labels


def rgib_ssl_loss(cfg: ObjectiveConfig, params: ModelParams, features, noisy: NoisySplit,
                  views, rng, weights=(1.0, 1.0, 1.0)) -> ad.Tensor:
    """Two-view objective: w_s * supervision + w_a * alignment + w_u * uniformity.

    ``views`` holds the two sampled composite augmentation operators;
    terms with zero weight are skipped entirely (the degenerate
    configurations rely on this).
    """
    w_s, w_a, w_u = weights
    queries, labels = _train_queries(noisy)
    edges1, x1 = augment.apply(views[0], noisy.obs_noisy, features, rng)
    edges2, x2 = augment.apply(views[1], noisy.obs_noisy, features, rng)
    u1 = encode(params, edges1, x1)
    u2 = encode(params, edges2, x2)
    loss = ad.scale(
        ad.add(bce_loss(edge_logits(u1, queries), labels), bce_loss(edge_logits(u2, queries), labels)),
        0.5 * w_s,
    )
    if w_a > 0 or w_u > 0:
        h1 = edge_representations(u1, queries)
        h2 = edge_representations(u2, queries)
        if w_a > 0:
            loss = ad.add(loss, ad.scale(alignment_loss(h1, h2, rng, cfg.gamma, cfg.alpha_shift), w_a))
        if w_u > 0:
            pos = np.nonzero(labels == 1)[0]
            neg = np.nonzero(labels == 0)[0]
            k = min(pos.size, neg.size, cfg.unif_pairs)
            if k == 0:
                raise ValueError("uniformity needs both positive and negative queries")
            pos_sel = rng.choice(pos, size=k, replace=False)
            neg_sel = rng.choice(neg, size=k, replace=False)
            loss = ad.add(loss, ad.scale(uniformity_loss(h1, h2, pos_sel, neg_sel), w_u))
    return loss


def compute_edge_probs(params: ModelParams, features, noisy: NoisySplit) -> ReparamState:
    """Edge-confidence probabilities from the weight-shared sampler.

    The sampler encodes the noisy observed graph with the very same
    parameters as the classifier and scores every observed edge and every
    train-query edge with a sigmoid dot product; the dense probability
    matrix is never materialized.
    """
    u = encode(params, noisy.obs_noisy, features)
    queries, labels = _train_queries(noisy)
    return ReparamState(
        p_obs=ad.sigmoid(edge_logits(u, noisy.obs_noisy)),
        p_query=ad.sigmoid(edge_logits(u, queries)),
        query_labels=labels.astype(np.int64),
    )


def constraint_penalty(probs: ad.Tensor, tau: float) -> ad.Tensor:
    """Mean binary KL of each probability to the constant prior tau."""
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie in (0, 1)")
    one = ad.constant(np.ones_like(probs.value))
    comp = ad.sub(one, probs)
    log_tau = float(np.log(tau))
    log_comp_tau = float(np.log1p(-tau))
    term = ad.add(
        ad.mul(probs, ad.sub(ad.log(probs), ad.scale(one, log_tau))),
        ad.mul(comp, ad.sub(ad.log(comp), ad.scale(one, log_comp_tau))),
    )
    return ad.mean(term)


def rgib_rep_loss(cfg: ObjectiveConfig, params: ModelParams, features, noisy: NoisySplit,
                  weights=(1.0, 1.0, 1.0), state_out: list | None = None) -> ad.Tensor:
    """Soft-selection objective: w_s * weighted BCE + w_A * R_A + w_Y * R_Y.

    Observed-edge probabilities reweight the encoder aggregation;
    positive-query probabilities reweight their BCE terms (negatives keep
    weight 1, since selection acts on the nonzero labels). With selection
    disabled everything reduces to plain supervised training.
    """
    w_s, w_A, w_Y = weights
    queries, labels = _train_queries(noisy)
    if not cfg.rep_selection:
        return ad.scale(supervised_loss(params, noisy.obs_noisy, features, queries, labels), w_s)
    state = compute_edge_probs(params, features, noisy)
    if state_out is not None:
        state_out.append(state)
    y = labels.reshape(-1, 1)
    # positive queries weighted by confidence, negatives by 1
    sample_w = ad.add(
        ad.mul(ad.constant(y), state.p_query),
        ad.constant(1.0 - y),
    )
    loss = ad.scale(
        supervised_loss(
            params, noisy.obs_noisy, features, queries, labels,
            edge_weights=state.p_obs, sample_weights=sample_w,
        ),
        w_s,
    )
    if w_A > 0:
        loss = ad.add(loss, ad.scale(constraint_penalty(state.p_obs, cfg.tau), w_A))
    if w_Y > 0:
        pos = np.nonzero(labels == 1)[0]
        loss = ad.add(
            loss, ad.scale(constraint_penalty(ad.gather_rows(state.p_query, pos), cfg.tau), w_Y)
        )
    return loss
