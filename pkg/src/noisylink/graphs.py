"""Immutable graph representation, ingestion, edge splits, negative sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class IngestionError(ValueError):
    pass


class CapacityError(ValueError):
    """The graph cannot supply the requested number of non-edges."""


def canonical_edges(pairs) -> list[tuple[int, int]]:
    """Deduplicate, symmetrize, and strip self-loops; pairs become (i, j) with i < j."""
    seen = set()
    for i, j in pairs:
        if i == j:
            continue
        seen.add((j, i) if j < i else (i, j))
    return sorted(seen)


@dataclass(frozen=True)
class Graph:
    """Node features plus an undirected edge list stored as (i, j), i < j."""

    n_nodes: int
    features: np.ndarray  # (n_nodes, D) float64
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        if feats.shape[0] != self.n_nodes:
            raise IngestionError("feature row count must equal n_nodes")
        for i, j in self.edges:
            if not (0 <= i < j < self.n_nodes):
                raise IngestionError(f"edge ({i},{j}) outside node range / not canonical")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def edge_set(self) -> frozenset:
        return frozenset(self.edges)


@dataclass(frozen=True)
class EdgeSplit:
    """85/5/10 query-edge partition with per-split negative samples.

    Train positives double as the observed adjacency and the train-query
    supervision targets; validation/test positives are held out of the
    observed graph entirely.
    """

    train_obs: tuple[tuple[int, int], ...]
    train_query: tuple[tuple[tuple[int, int], int], ...]
    valid_query: tuple[tuple[tuple[int, int], int], ...]
    test_query: tuple[tuple[tuple[int, int], int], ...]

    def positives(self, which: str) -> list[tuple[int, int]]:
        q = getattr(self, f"{which}_query")
        return [e for e, y in q if y == 1]


def load_graph(edge_file, feature_file) -> Graph:
    """Read whitespace 'src dst' pairs and a CSV feature matrix."""
    try:
        features = np.loadtxt(feature_file, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise IngestionError(f"feature file parse error: {exc}") from exc
    n_nodes = features.shape[0]
    pairs = []
    with open(edge_file, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) != 2:
                raise IngestionError(f"{edge_file}:{lineno}: expected two node ids")
            try:
                i, j = int(toks[0]), int(toks[1])
            except ValueError as exc:
                raise IngestionError(f"{edge_file}:{lineno}: non-numeric token") from exc
            if i < 0 or j < 0 or i >= n_nodes or j >= n_nodes:
                raise IngestionError(f"{edge_file}:{lineno}: node id outside feature rows")
            pairs.append((i, j))
    return Graph(n_nodes, features, tuple(canonical_edges(pairs)))


def sample_non_edges(n_nodes, forbidden, count, rng) -> list[tuple[int, int]]:
    """Uniformly sample ``count`` distinct node pairs outside ``forbidden``.

    Rejection sampling with an exhaustive fallback for small/dense graphs.
    """
    total_pairs = n_nodes * (n_nodes - 1) // 2
    capacity = total_pairs - len(forbidden)
    if count > capacity:
        raise CapacityError(f"requested {count} non-edges, only {capacity} exist")
    chosen: set[tuple[int, int]] = set()
    attempts = 0
    max_attempts = 30 * max(count, 1) + 1000
    while len(chosen) < count and attempts < max_attempts:
        attempts += 1
        i = int(rng.integers(n_nodes))
        j = int(rng.integers(n_nodes))
        if i == j:
            continue
        if i > j:
            i, j = j, i
        if (i, j) in forbidden or (i, j) in chosen:
            continue
        chosen.add((i, j))
    if len(chosen) < count:
        pool = [
            (i, j)
            for i in range(n_nodes)
            for j in range(i + 1, n_nodes)
            if (i, j) not in forbidden and (i, j) not in chosen
        ]
        idx = rng.choice(len(pool), size=count - len(chosen), replace=False)
        chosen.update(pool[k] for k in idx)
    out = sorted(chosen)
    rng.shuffle(out)
    return out


def split_edges(g: Graph, ratios=(0.85, 0.05, 0.10), rng=None) -> EdgeSplit:
    """Random positive partition plus per-split uniform negatives."""
    if abs(np.sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    if g.n_edges < 10:
        raise ValueError("graph too small to split (need >= 10 edges)")
    rng = np.random.default_rng(rng)
    perm = rng.permutation(g.n_edges)
    n_valid = round(ratios[1] * g.n_edges)
    n_test = round(ratios[2] * g.n_edges)
    n_train = g.n_edges - n_valid - n_test
    edges = list(g.edges)
    train_pos = [edges[k] for k in perm[:n_train]]
    valid_pos = [edges[k] for k in perm[n_train : n_train + n_valid]]
    test_pos = [edges[k] for k in perm[n_train + n_valid :]]
    forbidden = g.edge_set()
    negatives = sample_non_edges(g.n_nodes, forbidden, n_train + n_valid + n_test, rng)
    train_neg = negatives[:n_train]
    valid_neg = negatives[n_train : n_train + n_valid]
    test_neg = negatives[n_train + n_valid :]

    def labeled(pos, neg):
        return tuple([(e, 1) for e in pos] + [(e, 0) for e in neg])

    return EdgeSplit(
        train_obs=tuple(train_pos),
        train_query=labeled(train_pos, train_neg),
        valid_query=labeled(valid_pos, valid_neg),
        test_query=labeled(test_pos, test_neg),
    )


def generate_sbm(n, blocks, p_in, p_out, d=None, jitter=0.05, rng=None) -> Graph:
    """Stochastic block model with one-hot block features plus Gaussian jitter.

    Feature dim is ``d`` (default = blocks); the first ``blocks`` columns
    carry the one-hot block id, the rest are jitter-only padding.
    """
    if not (0 <= p_out <= p_in <= 1):
        raise ValueError("require 0 <= p_out <= p_in <= 1")
    d = blocks if d is None else int(d)
    if d < blocks:
        raise ValueError("feature dim must be >= block count")
    rng = np.random.default_rng(rng)
    block_of = np.arange(n) % blocks
    pairs = []
    for i in range(n):
        same = block_of[i + 1 :] == block_of[i]
        probs = np.where(same, p_in, p_out)
        hits = np.nonzero(rng.random(n - i - 1) < probs)[0]
        pairs.extend((i, i + 1 + int(h)) for h in hits)
    features = np.zeros((n, d))
    features[np.arange(n), block_of] = 1.0
    features += jitter * rng.standard_normal((n, d))
    return Graph(n, features, tuple(canonical_edges(pairs)))
