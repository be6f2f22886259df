"""Evaluation metrics: rank-sum AUC, perturbation-alignment, uniformity
energy, and structured result records."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields

import numpy as np

from .encoders import edge_representations, encode
from .graphs import sample_non_edges


class UndefinedMetricError(ValueError):
    pass


def auc(scores, labels) -> float:
    """Probability a random positive outranks a random negative, ties 1/2.

    Rank-sum (Mann-Whitney) form with midranks for ties, O(n log n).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("auc: aligned 1-D scores and labels required")
    n_pos = int(np.sum(labels == 1))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auc needs at least one positive and one negative")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum_pos = ranks[labels == 1].sum()
    return float((rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _perturb_edges(edges, n_nodes, forbidden, eps, rng):
    extra = sample_non_edges(n_nodes, forbidden, round(eps * len(edges)), rng)
    return list(edges) + extra


def alignment(params, g, noisy, rounds=5, perturb_eps=None, rng=None) -> float:
    """Stability of test-query edge representations under input perturbation.

    Each round injects fresh false edges (two independent draws at the
    run's input-noise ratio, floored at 0.2 so clean runs still get a
    nonzero probe) and measures the mean rowwise L2 distance between the
    unit-normalized edge representations of the two perturbed inputs.
    """
    rng = np.random.default_rng(rng)
    if perturb_eps is None:
        perturb_eps = noisy.spec.eps_a if noisy.spec.eps_a > 0 else 0.2
    queries = [e for e, _ in noisy.base.test_query]
    forbidden = set(noisy.obs_noisy) | g.edge_set()
    total = 0.0
    for _ in range(rounds):
        reps = []
        for _view in range(2):
            edges = _perturb_edges(noisy.obs_noisy, g.n_nodes, forbidden, perturb_eps, rng)
            u = encode(params, edges, g.features)
            h = edge_representations(u, queries).value
            norms = np.linalg.norm(h, axis=1, keepdims=True)
            reps.append(np.divide(h, norms, out=np.zeros_like(h), where=norms > 0))
        total += float(np.linalg.norm(reps[0] - reps[1], axis=1).mean())
    return total / rounds


def uniformity_energy(h: np.ndarray, sample=2000, rng=None) -> float:
    """log mean Gaussian-kernel value over pairs of unit-normalized rows.

    0 for a fully collapsed representation; more negative = more uniform.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] < 2:
        raise ValueError("uniformity_energy needs at least 2 representation rows")
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    hn = np.divide(h, norms, out=np.zeros_like(h), where=norms > 0)
    n = hn.shape[0]
    n_pairs = n * (n - 1) // 2
    if n_pairs <= sample:
        iu, ju = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(rng)
        iu = rng.integers(n, size=sample)
        ju = rng.integers(n, size=sample)
        clash = iu == ju
        while np.any(clash):
            ju[clash] = rng.integers(n, size=int(clash.sum()))
            clash = iu == ju
    d2 = ((hn[iu] - hn[ju]) ** 2).sum(axis=1)
    return float(np.log(np.mean(np.exp(-d2))))


def projected_angles(h: np.ndarray) -> np.ndarray:
    """Angles of rows projected onto their top-2 principal directions."""
    h = np.asarray(h, dtype=np.float64)
    centered = h - h.mean(axis=0, keepdims=True)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    xy = centered @ vt[:2].T
    return np.arctan2(xy[:, 1], xy[:, 0])


def dump_angles(h: np.ndarray, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "angle"])
        for k, a in enumerate(projected_angles(h)):
            writer.writerow([k, f"{a:.6f}"])


@dataclass
class MetricsRecord:
    dataset: str
    arch: str
    layers: int
    mode: str
    eps_a: float
    eps_y: float
    seed: int
    test_auc: float
    valid_auc: float
    alignment: float
    uniformity: float
    wall_time: float

    def __post_init__(self):
        for name in ("test_auc", "valid_auc"):
            v = getattr(self, name)
            # NaN marks a failed run row and is allowed through
            if not np.isnan(v) and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} outside [0, 1]: {v}")


RESULT_FIELDS = [f.name for f in fields(MetricsRecord)]


def emit_results(records, path):
    """Append records as CSV rows, writing the header once."""
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(RESULT_FIELDS)
        for rec in records:
            writer.writerow([getattr(rec, name) for name in RESULT_FIELDS])


def read_results(path) -> list[MetricsRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                MetricsRecord(
                    dataset=row["dataset"],
                    arch=row["arch"],
                    layers=int(row["layers"]),
                    mode=row["mode"],
                    eps_a=float(row["eps_a"]),
                    eps_y=float(row["eps_y"]),
                    seed=int(row["seed"]),
                    test_auc=float(row["test_auc"]),
                    valid_auc=float(row["valid_auc"]),
                    alignment=float(row["alignment"]),
                    uniformity=float(row["uniformity"]),
                    wall_time=float(row["wall_time"]),
                )
            )
    return out
