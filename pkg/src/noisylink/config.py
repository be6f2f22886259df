"""Experiment configuration: INI parsing, validation, grid expansion."""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .augment import THETA_RANGES
from .objectives import MODES, ObjectiveConfig
from .training import SCHEDULERS, TrainConfig

ALLOWED_LAYERS = (2, 4, 6)


@dataclass
class DatasetSpec:
    kind: str = "sbm"  # "sbm" or "files"
    edges: str = ""
    features: str = ""
    n: int = 1000
    blocks: int = 10
    p_in: float = 0.05
    p_out: float = 0.002
    dim: int | None = None
    jitter: float = 0.05
    seed: int = 7
    name: str = "sbm"


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    archs: list[str]
    layers: list[int]
    modes: list[str]
    eps_pairs: list[tuple[float, float]]
    objective: ObjectiveConfig  # template; mode filled per cell
    train: TrainConfig
    hidden: int = 128
    out_dir: str = "results"

    def cells(self):
        """Every independently runnable grid cell, in deterministic order."""
        for arch in self.archs:
            for n_layers in self.layers:
                for mode in self.modes:
                    for eps_a, eps_y in self.eps_pairs:
                        yield arch, n_layers, mode, eps_a, eps_y


def _floats(s):
    return [float(tok) for tok in s.replace(",", " ").split()]


def _ints(s):
    return [int(tok) for tok in s.replace(",", " ").split()]


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep option names case-sensitive (lambda_a vs lambda_A)
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    ds_sec = cp["dataset"] if cp.has_section("dataset") else {}
    dataset = DatasetSpec(
        kind=ds_sec.get("kind", "sbm"),
        edges=ds_sec.get("edges", ""),
        features=ds_sec.get("features", ""),
        n=int(ds_sec.get("n", 1000)),
        blocks=int(ds_sec.get("blocks", 10)),
        p_in=float(ds_sec.get("p_in", 0.05)),
        p_out=float(ds_sec.get("p_out", 0.002)),
        dim=int(ds_sec["dim"]) if "dim" in ds_sec else None,
        jitter=float(ds_sec.get("jitter", 0.05)),
        seed=int(ds_sec.get("seed", 7)),
        name=ds_sec.get("name", ds_sec.get("kind", "sbm")),
    )
    mo = cp["model"] if cp.has_section("model") else {}
    ob = cp["objective"] if cp.has_section("objective") else {}
    no = cp["noise"] if cp.has_section("noise") else {}
    tr = cp["train"] if cp.has_section("train") else {}
    ou = cp["output"] if cp.has_section("output") else {}

    eps_a = _floats(no.get("eps_a", no.get("eps", "0")))
    eps_y = _floats(no.get("eps_y", no.get("eps", "0")))
    if len(eps_a) == 1 and len(eps_y) > 1:
        eps_a = eps_a * len(eps_y)
    if len(eps_y) == 1 and len(eps_a) > 1:
        eps_y = eps_y * len(eps_a)
    if len(eps_a) != len(eps_y):
        raise ValueError("eps_a and eps_y lists must align (or broadcast from length 1)")

    objective = ObjectiveConfig(
        mode="standard",
        lambda_s=float(ob.get("lambda_s", 1.0)),
        lambda_a=float(ob.get("lambda_a", 1.0)),
        lambda_u=float(ob.get("lambda_u", 1.0)),
        lambda_A=float(ob.get("lambda_A", 1.0)),
        lambda_Y=float(ob.get("lambda_Y", 1.0)),
        gamma=float(ob.get("gamma", 1.0)),
        alpha_shift=float(ob.get("alpha_shift", 1.0)),
        tau=float(ob.get("tau", 0.7)),
        unif_pairs=int(ob.get("unif_pairs", 512)),
        dropedge_p=float(ob.get("dropedge_p", 0.2)),
        aug_ops=int(ob.get("aug_ops", 1)),
        rep_selection=ob.get("rep_selection", "true").lower() in ("1", "true", "yes"),
    )
    train = TrainConfig(
        epochs=int(tr.get("epochs", 300)),
        lr=float(tr.get("lr", 1e-3)),
        patience=int(tr.get("patience", 100)),
        scheduler=tr.get("scheduler", "constant"),
        scheduler_param=float(tr.get("scheduler_param", 0.5)),
        eval_every=int(tr.get("eval_every", 10)),
        seeds=tuple(_ints(tr.get("seeds", "0 1 2 3 4"))),
    )
    return ExperimentConfig(
        dataset=dataset,
        archs=[a.strip().lower() for a in mo.get("arch", "gcn").split(",")],
        layers=_ints(mo.get("layers", "2")),
        modes=[m.strip() for m in ob.get("mode", "standard").split(",")],
        eps_pairs=list(zip(eps_a, eps_y)),
        objective=objective,
        train=train,
        hidden=int(mo.get("hidden", 128)),
        out_dir=ou.get("dir", "results"),
    )


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """Range/schema diagnostics without running anything."""
    problems = []
    if cfg.dataset.kind not in ("sbm", "files"):
        problems.append(f"dataset.kind: must be 'sbm' or 'files', got '{cfg.dataset.kind}'")
    if cfg.dataset.kind == "files" and not (cfg.dataset.edges and cfg.dataset.features):
        problems.append("dataset: kind=files requires 'edges' and 'features' paths")
    if cfg.dataset.kind == "sbm" and not (0 <= cfg.dataset.p_out <= cfg.dataset.p_in <= 1):
        problems.append("dataset: require 0 <= p_out <= p_in <= 1")
    for arch in cfg.archs:
        if arch not in ("gcn", "gat", "sage"):
            problems.append(f"arch: must be one of gcn/gat/sage, got '{arch}'")
    for n_layers in cfg.layers:
        if n_layers not in ALLOWED_LAYERS:
            problems.append(f"layers: must be one of {ALLOWED_LAYERS}, got {n_layers}")
    for mode in cfg.modes:
        if mode not in MODES:
            problems.append(f"mode: must be one of {MODES}, got '{mode}'")
    for eps_a, eps_y in cfg.eps_pairs:
        if eps_a < 0 or eps_y < 0:
            problems.append(f"eps: ratios must be non-negative, got ({eps_a}, {eps_y})")
    ob = cfg.objective
    for name in ("lambda_s", "lambda_a", "lambda_u", "lambda_A", "lambda_Y"):
        if getattr(ob, name) < 0:
            problems.append(f"{name}: must be non-negative")
    if not (0 < ob.tau < 1):
        problems.append(f"tau: must lie in (0, 1), got {ob.tau}")
    lo, hi = THETA_RANGES["edge_removing"]
    if not (lo <= ob.dropedge_p < 1):
        problems.append(f"dropedge_p: must lie in [0, 1), got {ob.dropedge_p}")
    if ob.aug_ops < 1:
        problems.append("aug_ops: must be >= 1")
    if cfg.train.scheduler not in SCHEDULERS:
        problems.append(f"scheduler: must be one of {SCHEDULERS}")
    if cfg.train.lr < 0:
        problems.append("lr: must be non-negative")
    if cfg.train.patience > cfg.train.epochs:
        problems.append("patience: must not exceed epochs")
    if cfg.hidden < 1:
        problems.append("hidden: must be positive")
    return problems
