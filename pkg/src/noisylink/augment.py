"""Stochastic graph views: hybrid augmentation search space + DropEdge."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OP_KINDS = ("edge_removing", "feature_masking", "feature_dropping", "identity")

# hyper-parameter range per operator kind (open intervals)
THETA_RANGES = {
    "edge_removing": (0.0, 0.5),
    "feature_masking": (0.0, 0.3),
    "feature_dropping": (0.0, 0.3),
}


@dataclass(frozen=True)
class AugmentationOp:
    kind: str
    theta: float | None = None

    def __post_init__(self):
        if self.kind not in OP_KINDS:
            raise ValueError(f"unknown augmentation kind: {self.kind}")
        if self.kind == "identity":
            if self.theta is not None:
                raise ValueError("identity carries no theta")
        else:
            lo, hi = THETA_RANGES[self.kind]
            if not (lo < self.theta < hi):
                raise ValueError(f"{self.kind}: theta must lie in ({lo}, {hi})")


def sample_op(rng) -> AugmentationOp:
    kind = OP_KINDS[int(rng.integers(len(OP_KINDS)))]
    if kind == "identity":
        return AugmentationOp("identity")
    lo, hi = THETA_RANGES[kind]
    theta = float(rng.uniform(lo, hi))
    while theta == lo:  # open interval
        theta = float(rng.uniform(lo, hi))
    return AugmentationOp(kind, theta)


def sample_hybrid(n_ops, rng) -> tuple[AugmentationOp, ...]:
    """Draw a composite operator of n_ops uniformly sampled stages."""
    if n_ops < 1:
        raise ValueError("need at least one augmentation stage")
    return tuple(sample_op(rng) for _ in range(n_ops))


def apply_op(op: AugmentationOp, edges, x: np.ndarray, rng):
    """Apply one stage; returns (edges', x'). Node count never changes."""
    if op.kind == "identity":
        return list(edges), x
    if op.kind == "edge_removing":
        keep = rng.random(len(edges)) >= op.theta
        return [e for e, k in zip(edges, keep) if k], x
    if op.kind == "feature_masking":
        mask = rng.random(x.shape[1]) >= op.theta
        return list(edges), x * mask[None, :]
    # feature_dropping
    return list(edges), x * (rng.random(x.shape) >= op.theta)


def apply(ops, edges, x: np.ndarray, rng):
    """Apply a composite operator stage by stage."""
    if isinstance(ops, AugmentationOp):
        ops = (ops,)
    for op in ops:
        edges, x = apply_op(op, edges, x, rng)
    return edges, x


def drop_edge(edges, p: float, rng):
    """Independent Bernoulli(p) edge removal (DropEdge baseline)."""
    if not (0 <= p < 1):
        raise ValueError("drop probability must lie in [0, 1)")
    if p == 0:
        return list(edges)
    keep = rng.random(len(edges)) >= p
    return [e for e, k in zip(edges, keep) if k]
