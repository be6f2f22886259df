"""Bilateral edge-noise injection and edge-homophily diagnostics.

Input-side noise adds false edges to the observed training adjacency;
label-side noise adds false positive supervision targets. Both are drawn
without replacement from the non-edges of the clean graph, so the ratio
identity (added count = round(eps * clean count)) holds exactly and the
injected set never intersects the clean edge set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import EdgeSplit, Graph, sample_non_edges


@dataclass(frozen=True)
class NoiseSpec:
    eps_a: float = 0.0
    eps_y: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.eps_a < 0 or self.eps_y < 0:
            raise ValueError("noise ratios must be non-negative")


@dataclass(frozen=True)
class NoisySplit:
    """A clean split plus its noise-augmented observed edges and labels."""

    base: EdgeSplit
    spec: NoiseSpec
    obs_noisy: tuple[tuple[int, int], ...]
    train_query_noisy: tuple[tuple[tuple[int, int], int], ...]
    added_obs: tuple[tuple[int, int], ...]
    added_labels: tuple[tuple[int, int], ...]

    @property
    def is_clean(self) -> bool:
        return not self.added_obs and not self.added_labels


def inject_bilateral(g: Graph, split: EdgeSplit, spec: NoiseSpec) -> NoisySplit:
    """Apply input and label noise to the training side of a split.

    eps_a scales with the observed training edges, eps_y with the train
    positives; validation and test queries are never touched. Label-noise
    edges stay out of the observed adjacency: they are unobserved
    false-positive supervision.
    """
    rng = np.random.default_rng(spec.seed)
    n_obs = len(split.train_obs)
    n_pos = len(split.positives("train"))
    n_add_a = round(spec.eps_a * n_obs)
    n_add_y = round(spec.eps_y * n_pos)
    # forbid clean edges, existing query negatives, and each other
    forbidden = set(g.edges)
    for q in (split.train_query, split.valid_query, split.test_query):
        forbidden.update(e for e, _ in q)
    drawn = sample_non_edges(g.n_nodes, forbidden, n_add_a + n_add_y, rng)
    added_obs = tuple(drawn[:n_add_a])
    added_labels = tuple(drawn[n_add_a:])
    return NoisySplit(
        base=split,
        spec=spec,
        obs_noisy=split.train_obs + added_obs,
        train_query_noisy=split.train_query + tuple((e, 1) for e in added_labels),
        added_obs=added_obs,
        added_labels=added_labels,
    )


def edge_homophily(g: Graph, edges) -> list[float]:
    """Per-edge cosine similarity of endpoint features; 0 for zero-norm rows."""
    out = []
    for i, j in edges:
        xi, xj = g.features[i], g.features[j]
        ni, nj = np.linalg.norm(xi), np.linalg.norm(xj)
        if ni == 0.0 or nj == 0.0:
            out.append(0.0)
        else:
            out.append(float(np.dot(xi, xj) / (ni * nj)))
    return out


def homophily_table(g: Graph, noisy: NoisySplit) -> list[tuple[tuple[int, int], float, str]]:
    """Rows of (edge, cosine, class) for the diagnostic CSV dump."""
    rows = []
    for edges, cls in (
        (noisy.base.train_obs, "clean"),
        (noisy.added_obs, "input-noise"),
        (noisy.added_labels, "label-noise"),
    ):
        for edge, cos in zip(edges, edge_homophily(g, edges)):
            rows.append((edge, cos, cls))
    return rows
