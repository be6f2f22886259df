"""L-layer GCN/GAT/SAGE encoders and the link-prediction readout.

Message passing runs over a directed expansion of the undirected edge
list. Self contributions follow the combine step of each architecture:
the self term uses the same layer weights as the neighbor messages, and
degree normalization counts the node itself (d_hat = deg + 1) so isolated
nodes stay finite. Hidden activations are ReLU, the last layer is linear,
and GAT scores attention with LeakyReLU(0.2) and a single head.

Optional per-undirected-edge weights scale the neighbor messages (GCN,
SAGE) or the post-softmax attention coefficients (GAT); they carry
gradients when given as a differentiable tensor, which is how soft edge
selection plugs into the same forward path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

ARCHS = ("gcn", "gat", "sage")


@dataclass
class ModelParams:
    arch: str
    dims: list[int]
    weights: list[ad.Tensor] = field(default_factory=list)
    att_src: list[ad.Tensor] = field(default_factory=list)
    att_dst: list[ad.Tensor] = field(default_factory=list)

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    def all_tensors(self) -> list[ad.Tensor]:
        return self.weights + self.att_src + self.att_dst

    def copy(self) -> "ModelParams":
        clone = ModelParams(self.arch, list(self.dims))
        clone.weights = [ad.tensor(w.value.copy(), requires_grad=True) for w in self.weights]
        clone.att_src = [ad.tensor(a.value.copy(), requires_grad=True) for a in self.att_src]
        clone.att_dst = [ad.tensor(a.value.copy(), requires_grad=True) for a in self.att_dst]
        return clone


def init_params(arch, dims, rng=None) -> ModelParams:
    """Glorot-uniform weights; small attention vectors for GAT."""
    arch = arch.lower()
    if arch not in ARCHS:
        raise ValueError(f"unknown architecture: {arch}")
    if len(dims) < 2:
        raise ValueError("dims must chain at least one layer")
    rng = np.random.default_rng(rng)
    params = ModelParams(arch, list(dims))
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (d_in + d_out))
        params.weights.append(ad.tensor(rng.uniform(-bound, bound, (d_in, d_out)), requires_grad=True))
        if arch == "gat":
            bound_a = np.sqrt(6.0 / (d_out + 1))
            params.att_src.append(ad.tensor(rng.uniform(-bound_a, bound_a, (d_out, 1)), requires_grad=True))
            params.att_dst.append(ad.tensor(rng.uniform(-bound_a, bound_a, (d_out, 1)), requires_grad=True))
    return params


def directed_arrays(edges):
    """Expand undirected (i, j) pairs to both directions.

    Returns (rows, cols, tile_idx): messages flow cols -> rows, and
    tile_idx maps each directed edge back to its undirected source so a
    per-undirected-edge weight vector can be tiled by a gather.
    """
    m = len(edges)
    if m == 0:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), z.copy()
    e = np.asarray(edges, dtype=np.int64)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    tile_idx = np.concatenate([np.arange(m), np.arange(m)])
    return rows, cols, tile_idx


def _degrees(rows, n_nodes):
    deg = np.zeros(n_nodes)
    np.add.at(deg, rows, 1.0)
    return deg


def _tiled_weights(edge_weights, tile_idx, coeff):
    """Per-directed-edge weight tensor: tiled learnable part x constant coeff."""
    tiled = ad.gather_rows(edge_weights, tile_idx)
    return ad.scale_rows(tiled, coeff)


def encode(params: ModelParams, edges, x, edge_weights: ad.Tensor | None = None) -> ad.Tensor:
    """Run the encoder over an edge list; returns node representations."""
    h = x if isinstance(x, ad.Tensor) else ad.constant(x)
    if h.cols != params.dims[0]:
        raise ad.ShapeError(f"feature dim {h.cols} != encoder input dim {params.dims[0]}")
    if edge_weights is not None and edge_weights.value.size != len(edges):
        raise ad.ShapeError("one aggregation weight per undirected edge required")
    n = h.rows
    rows, cols, tile_idx = directed_arrays(edges)
    deg = _degrees(rows, n)
    for layer in range(params.n_layers):
        last = layer == params.n_layers - 1
        if params.arch == "gcn":
            h = _gcn_layer(params, layer, h, rows, cols, tile_idx, deg, edge_weights, n)
        elif params.arch == "sage":
            h = _sage_layer(params, layer, h, rows, cols, tile_idx, deg, edge_weights, n)
        else:
            h = _gat_layer(params, layer, h, rows, cols, tile_idx, edge_weights, n)
        if not last:
            h = ad.relu(h)
    return h


def _weighted_degrees(rows, tile_idx, edge_weights, n):
    """Sum of incident edge weights per node, from detached weight values.

    The normalization acts as a preconditioner of the soft-selected graph:
    gradients flow through the message weights, not through the degrees,
    and uniform weights reproduce the unweighted encoder exactly.
    """
    dw = np.zeros(n)
    np.add.at(dw, rows, edge_weights.value[tile_idx, 0])
    return dw


def _gcn_layer(params, layer, h, rows, cols, tile_idx, deg, edge_weights, n):
    hw = ad.matmul(h, params.weights[layer])
    if edge_weights is None:
        d_hat = deg + 1.0
        coeff = 1.0 / np.sqrt(d_hat[rows] * d_hat[cols])
        w_t = ad.constant(coeff.reshape(-1, 1)) if rows.size else None
        msg = ad.spmm(rows, cols, hw, n, weights=w_t)
    else:
        d_hat = _weighted_degrees(rows, tile_idx, edge_weights, n) + 1.0
        coeff = 1.0 / np.sqrt(d_hat[rows] * d_hat[cols])
        msg = ad.spmm(rows, cols, hw, n, weights=_tiled_weights(edge_weights, tile_idx, coeff))
    self_term = ad.scale_rows(hw, 1.0 / d_hat)
    return ad.add(msg, self_term)


def _sage_layer(params, layer, h, rows, cols, tile_idx, deg, edge_weights, n):
    hw = ad.matmul(h, params.weights[layer])
    if edge_weights is None:
        inv_deg = np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0)
        coeff = inv_deg[rows]
        w_t = ad.constant(coeff.reshape(-1, 1)) if rows.size else None
        msg = ad.spmm(rows, cols, hw, n, weights=w_t)
    else:
        dw = _weighted_degrees(rows, tile_idx, edge_weights, n)
        inv_dw = np.where(dw > 0, 1.0 / np.maximum(dw, 1e-12), 0.0)
        msg = ad.spmm(rows, cols, hw, n, weights=_tiled_weights(edge_weights, tile_idx, inv_dw[rows]))
    return ad.add(msg, hw)


def _gat_layer(params, layer, h, rows, cols, tile_idx, edge_weights, n):
    hw = ad.matmul(h, params.weights[layer])
    # attention candidates: neighbors plus the node itself
    self_idx = np.arange(n, dtype=np.int64)
    a_rows = np.concatenate([rows, self_idx])
    a_cols = np.concatenate([cols, self_idx])
    order = np.argsort(a_rows, kind="stable")
    a_rows, a_cols = a_rows[order], a_cols[order]
    s_src = ad.matmul(hw, params.att_src[layer])
    s_dst = ad.matmul(hw, params.att_dst[layer])
    scores = ad.leaky_relu(
        ad.add(ad.gather_rows(s_src, a_rows), ad.gather_rows(s_dst, a_cols)), slope=0.2
    )
    if edge_weights is not None:
        # shift scores by log(w) before the softmax: attention becomes
        # w_e * e^s / sum w_e * e^s, i.e. renormalized weighted attention
        # (self loops keep weight 1, log 1 = 0)
        m = edge_weights.value.size
        sel = np.concatenate([tile_idx, np.full(n, m, dtype=np.int64)])[order]
        flat = edge_weights if edge_weights.cols == 1 else ad.sum(edge_weights, axis=1)
        padded = ad.append_rows_const(flat, [[1.0]])
        scores = ad.add(scores, ad.log(ad.gather_rows(padded, sel)))
    alpha = ad.segment_softmax(scores, a_rows, n)
    return ad.spmm(a_rows, a_cols, hw, n, weights=alpha)


def edge_logits(u: ad.Tensor, queries) -> ad.Tensor:
    """Dot-product readout, one score per query pair."""
    q = np.asarray([(i, j) for i, j in queries], dtype=np.int64).reshape(-1, 2)
    ui = ad.gather_rows(u, q[:, 0])
    uj = ad.gather_rows(u, q[:, 1])
    return ad.sum(ad.mul(ui, uj), axis=1)


def edge_representations(u: ad.Tensor, queries) -> ad.Tensor:
    """Hadamard readout, one representation row per query pair."""
    q = np.asarray([(i, j) for i, j in queries], dtype=np.int64).reshape(-1, 2)
    ui = ad.gather_rows(u, q[:, 0])
    uj = ad.gather_rows(u, q[:, 1])
    return ad.mul(ui, uj)
