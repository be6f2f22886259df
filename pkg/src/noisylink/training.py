"""Optimization loop: Adam, loss-weight schedulers, early stopping on
validation AUC, deterministic seeded runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import augment, metrics, objectives
from . import autodiff as ad
from .encoders import ModelParams, edge_logits, encode, init_params
from .noise import NoisySplit

SCHEDULERS = ("constant", "linear", "sin", "cos", "exp")


class TrainAbort(RuntimeError):
    """Raised when a loss goes non-finite; carries the offending step."""

    def __init__(self, epoch, message):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int = 300
    lr: float = 1e-3
    patience: int = 100
    scheduler: str = "constant"
    scheduler_param: float = 0.5
    eval_every: int = 10
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.patience > self.epochs:
            raise ValueError("patience must not exceed epochs")
        if self.scheduler not in SCHEDULERS:
            raise ValueError(f"unknown scheduler: {self.scheduler}")


def scheduler_alpha(kind: str, param: float, t: float) -> float:
    """Supervision weight alpha_t for normalized step t in [0, 1].

    The exponential form is normalized to (e^{kt}-1)/(e^k-1) so its range
    is [0, 1]; all outputs are clamped to [0, 1].
    """
    if not (0.0 <= t <= 1.0):
        raise ValueError("t must be normalized to [0, 1]")
    if kind == "constant":
        a = param
    elif kind == "linear":
        a = param * t
    elif kind == "sin":
        a = math.sin(t * math.pi / 2.0)
    elif kind == "cos":
        a = math.cos(t * math.pi / 2.0)
    elif kind == "exp":
        k = param if param != 0 else 1.0
        a = math.expm1(k * t) / math.expm1(k)
    else:
        raise ValueError(f"unknown scheduler: {kind}")
    return min(1.0, max(0.0, a))


class Adam:
    """Standard Adam over a list of leaf tensors."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in enumerate(self.params):
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1**self.t)
            v_hat = self.v[k] / (1 - b2**self.t)
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    params: ModelParams
    history: list = field(default_factory=list)
    best_valid_auc: float = 0.0
    best_epoch: int = -1


def evaluate_auc(params, features, edges, query_set, edge_weights=None) -> float:
    """AUC of sigmoid dot-product scores on a labeled query set."""
    queries = [e for e, _ in query_set]
    labels = np.asarray([y for _, y in query_set])
    u = encode(params, edges, features, edge_weights=edge_weights)
    scores = edge_logits(u, queries).value[:, 0]
    return metrics.auc(scores, labels)


def selection_weights(params, features, noisy):
    """Detached observed-edge confidences of the soft-selection sampler.

    A model trained with soft edge selection is deployed on the graph it
    selected: scoring passes messages over the observed edges reweighted
    by the sampler's confidence in each edge.
    """
    state = objectives.compute_edge_probs(params, features, noisy)
    return ad.constant(state.p_obs.value)


def _epoch_loss(cfg, params, features, noisy, rng, alpha_t):
    mode = cfg.mode
    if mode in ("standard", "dropedge"):
        edges = noisy.obs_noisy
        if mode == "dropedge":
            edges = augment.drop_edge(edges, cfg.dropedge_p, rng)
        queries = [e for e, _ in noisy.train_query_noisy]
        labels = [y for _, y in noisy.train_query_noisy]
        return objectives.supervised_loss(params, edges, features, queries, labels)
    if mode in ("gib", "rgib_ssl"):
        views = (augment.sample_hybrid(cfg.aug_ops, rng), augment.sample_hybrid(cfg.aug_ops, rng))
        w_u = 0.0 if mode == "gib" else (1 - alpha_t) * cfg.lambda_u
        weights = (alpha_t * cfg.lambda_s, (1 - alpha_t) * cfg.lambda_a, w_u)
        return objectives.rgib_ssl_loss(cfg, params, features, noisy, views, rng, weights)
    # rgib_rep
    weights = (alpha_t * cfg.lambda_s, (1 - alpha_t) * cfg.lambda_A, (1 - alpha_t) * cfg.lambda_Y)
    return objectives.rgib_rep_loss(cfg, params, features, noisy, weights)


def train(g, noisy: NoisySplit, arch: str, layers: int, hidden: int,
          obj_cfg: objectives.ObjectiveConfig, train_cfg: TrainConfig, seed: int,
          out_dim: int | None = None) -> TrainResult:
    """Run one seeded training loop and restore the best-validation weights."""
    rng = np.random.default_rng(seed)
    dims = [g.feature_dim] + [hidden] * (layers - 1) + [hidden if out_dim is None else out_dim]
    params = init_params(arch, dims, rng=rng)
    opt = Adam(params.all_tensors(), lr=train_cfg.lr)
    result = TrainResult(params=params.copy())
    stale = 0
    denom = max(train_cfg.epochs - 1, 1)
    for epoch in range(train_cfg.epochs):
        alpha_t = scheduler_alpha(train_cfg.scheduler, train_cfg.scheduler_param, epoch / denom)
        try:
            loss = _epoch_loss(obj_cfg, params, g.features, noisy, rng, alpha_t)
        except ad.NumericError as exc:
            raise TrainAbort(epoch, f"non-finite loss ({exc})") from exc
        loss_val = loss.item()
        if not math.isfinite(loss_val):
            raise TrainAbort(epoch, f"loss = {loss_val}")
        ad.zero_grads(params.all_tensors())
        loss.backward()
        opt.step()
        entry = {"epoch": epoch, "loss": loss_val, "alpha": alpha_t}
        if (epoch + 1) % train_cfg.eval_every == 0 or epoch == train_cfg.epochs - 1:
            eval_w = None
            if obj_cfg.mode == "rgib_rep" and obj_cfg.rep_selection:
                eval_w = selection_weights(params, g.features, noisy)
            valid_auc = evaluate_auc(params, g.features, noisy.obs_noisy,
                                     noisy.base.valid_query, edge_weights=eval_w)
            entry["valid_auc"] = valid_auc
            if valid_auc > result.best_valid_auc:
                result.best_valid_auc = valid_auc
                result.best_epoch = epoch
                result.params = params.copy()
                stale = 0
            else:
                stale += train_cfg.eval_every
        result.history.append(entry)
        if stale >= train_cfg.patience:
            break
    if result.best_epoch < 0:  # no eval point improved; keep final weights
        result.params = params.copy()
        result.best_epoch = train_cfg.epochs - 1
    return result
