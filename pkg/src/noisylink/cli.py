"""Experiment front door: run / validate / noise-probe subcommands."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import click
import numpy as np

from . import metrics, training
from .config import ExperimentConfig, load_config, validate_config
from .encoders import edge_representations, encode
from .graphs import Graph, generate_sbm, load_graph, split_edges
from .metrics import MetricsRecord, emit_results
from .noise import NoiseSpec, homophily_table, inject_bilateral


def build_graph(cfg: ExperimentConfig) -> Graph:
    ds = cfg.dataset
    if ds.kind == "files":
        return load_graph(ds.edges, ds.features)
    return generate_sbm(ds.n, ds.blocks, ds.p_in, ds.p_out, d=ds.dim, jitter=ds.jitter, rng=ds.seed)


def run_cell_seed(cfg: ExperimentConfig, g: Graph, arch, n_layers, mode, eps_a, eps_y, seed):
    """Train one (cell, seed) pair and return its metrics record."""
    start = time.perf_counter()
    split = split_edges(g, rng=cfg.dataset.seed)
    noisy = inject_bilateral(g, split, NoiseSpec(eps_a=eps_a, eps_y=eps_y, seed=seed))
    obj = dataclasses.replace(cfg.objective, mode=mode)
    result = training.train(g, noisy, arch, n_layers, cfg.hidden, obj, cfg.train, seed)
    eval_w = None
    if mode == "rgib_rep" and obj.rep_selection:
        eval_w = training.selection_weights(result.params, g.features, noisy)
    test_auc = training.evaluate_auc(result.params, g.features, noisy.obs_noisy,
                                     split.test_query, edge_weights=eval_w)
    align = metrics.alignment(result.params, g, noisy, rng=seed + 1)
    u = encode(result.params, noisy.obs_noisy, g.features)
    h_test = edge_representations(u, [e for e, _ in split.test_query]).value
    unif = metrics.uniformity_energy(h_test, rng=seed + 2)
    return MetricsRecord(
        dataset=cfg.dataset.name,
        arch=arch,
        layers=n_layers,
        mode=mode,
        eps_a=eps_a,
        eps_y=eps_y,
        seed=seed,
        test_auc=test_auc,
        valid_auc=result.best_valid_auc,
        alignment=align,
        uniformity=unif,
        wall_time=time.perf_counter() - start,
    )


def _job(args):
    try:
        return run_cell_seed(*args), None
    except Exception as exc:  # failed cell: keep going, record the failure
        cfg, _, arch, n_layers, mode, eps_a, eps_y, seed = args
        failed = MetricsRecord(
            dataset=cfg.dataset.name, arch=arch, layers=n_layers, mode=mode,
            eps_a=eps_a, eps_y=eps_y, seed=seed,
            test_auc=float("nan"), valid_auc=float("nan"),
            alignment=float("nan"), uniformity=float("nan"), wall_time=float("nan"),
        )
        return failed, f"{arch}/{n_layers}l/{mode}/eps=({eps_a},{eps_y})/seed={seed}: {exc}"


@click.group()
def main():
    """Robust link prediction under bilateral edge noise."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
@click.option("--out", default=None, help="Override the output directory.")
def run(config_path, out):
    """Execute every grid cell x seed of a config and append results."""
    cfg = load_config(config_path)
    problems = validate_config(cfg)
    if problems:
        for p in problems:
            click.echo(f"config error: {p}", err=True)
        sys.exit(2)
    out_dir = out or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    g = build_graph(cfg)
    jobs = [
        (cfg, g, arch, n_layers, mode, eps_a, eps_y, seed)
        for arch, n_layers, mode, eps_a, eps_y in cfg.cells()
        for seed in cfg.train.seeds
    ]
    workers = int(os.environ.get("NOISYLINK_WORKERS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_job, jobs))
    else:
        outcomes = [_job(j) for j in jobs]
    records = [rec for rec, _ in outcomes]
    failures = [msg for _, msg in outcomes if msg]
    emit_results(records, os.path.join(out_dir, "results.csv"))
    _print_summary(records)
    for msg in failures:
        click.echo(f"FAILED {msg}", err=True)
    sys.exit(1 if failures else 0)


def _print_summary(records):
    cells = {}
    for r in records:
        cells.setdefault((r.arch, r.layers, r.mode, r.eps_a, r.eps_y), []).append(r.test_auc)
    click.echo(f"{'arch':>5} {'layers':>6} {'mode':>9} {'eps_a':>6} {'eps_y':>6} {'test AUC':>17}")
    for key, aucs in sorted(cells.items()):
        arch, n_layers, mode, eps_a, eps_y = key
        vals = [a for a in aucs if not math.isnan(a)]
        if vals:
            stat = f"{np.mean(vals):.4f} ± {np.std(vals):.4f}"
        else:
            stat = "failed"
        click.echo(f"{arch:>5} {n_layers:>6} {mode:>9} {eps_a:>6.2f} {eps_y:>6.2f} {stat:>17}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True))
def validate(config_path):
    """Schema and range checks without running anything."""
    try:
        cfg = load_config(config_path)
    except (ValueError, KeyError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    problems = validate_config(cfg)
    for p in problems:
        click.echo(f"config error: {p}", err=True)
    if problems:
        sys.exit(2)
    click.echo("config OK")


@main.command("noise-probe")
@click.argument("edges_path", type=click.Path(exists=True))
@click.argument("features_path", type=click.Path(exists=True))
@click.option("--eps-a", default=0.2, show_default=True)
@click.option("--eps-y", default=0.2, show_default=True)
@click.option("--noise-seed", default=0, show_default=True)
@click.option("--split-seed", default=7, show_default=True)
@click.option("--out", default="homophily.csv", show_default=True)
def noise_probe(edges_path, features_path, eps_a, eps_y, noise_seed, split_seed, out):
    """Inject bilateral noise and dump per-edge homophily diagnostics."""
    g = load_graph(edges_path, features_path)
    split = split_edges(g, rng=split_seed)
    noisy = inject_bilateral(g, split, NoiseSpec(eps_a=eps_a, eps_y=eps_y, seed=noise_seed))
    n_obs = len(split.train_obs)
    n_pos = len(split.positives("train"))
    click.echo(f"nodes={g.n_nodes} edges={g.n_edges}")
    click.echo(f"observed train edges={n_obs} added input-noise edges={len(noisy.added_obs)} "
               f"(target {round(eps_a * n_obs)})")
    click.echo(f"train positives={n_pos} added label-noise edges={len(noisy.added_labels)} "
               f"(target {round(eps_y * n_pos)})")
    rows = homophily_table(g, noisy)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst", "cosine", "class"])
        for (i, j), cos, cls in rows:
            writer.writerow([i, j, f"{cos:.6f}", cls])
    by_class = {}
    for _, cos, cls in rows:
        by_class.setdefault(cls, []).append(cos)
    for cls, vals in by_class.items():
        click.echo(f"homophily[{cls}]: mean={np.mean(vals):.4f} n={len(vals)}")
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
