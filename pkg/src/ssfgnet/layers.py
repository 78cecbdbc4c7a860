"""Message-passing layers: Graphsage, GAT, and GatedGCN.

All layers aggregate over incoming edges (node i receives from sources j
of edges j -> i) and are pure functions of (graph, features, params).
Stochastic scaling is threaded through a mapping of named ScalingSite
objects so each placement has its own RNG streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .autodiff import (
    BatchNormState,
    Parameter,
    Tensor,
    add,
    add_scalar,
    batch_norm,
    concat_cols,
    div,
    elu,
    gather_rows,
    leaky_relu,
    matmul,
    mul,
    relu,
    scale,
    segment_reduce,
    segment_softmax,
    sigmoid,
)
from .errors import ConfigError
from .graph import Graph
from .ssfg import ScalingSite, SsfgConfig, ssfg_apply

KINDS = ("sage", "gat", "gatedgcn")
EPS_GATE = 1e-6

_PLACEMENTS = {
    "sage": ("activation", "input"),
    "gat": ("head",),
    "gatedgcn": ("node_edge", "node", "edge"),
}


@dataclass
class LayerConfig:
    """Shape and behavior switches for one layer."""

    kind: str
    in_dim: int
    out_dim: int
    heads: int = 1
    aggregator: str = "mean"
    residual: bool = True
    batchnorm: bool = True
    bias: bool = True
    concat_heads: bool = True
    gate_norm: bool = True
    ssfg_placement: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(f"dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.aggregator not in ("mean", "sum"):
            raise ConfigError(f"aggregator must be mean or sum, got {self.aggregator!r}")
        if self.kind == "gat":
            if self.heads < 1:
                raise ConfigError(f"heads must be >= 1, got {self.heads}")
            if self.concat_heads and self.out_dim % self.heads:
                raise ConfigError(
                    f"out_dim {self.out_dim} not divisible by {self.heads} heads"
                )
        if self.kind == "gatedgcn":
            if self.in_dim != self.out_dim:
                raise ConfigError(
                    "gatedgcn keeps node and edge widths equal; "
                    f"got in_dim {self.in_dim} != out_dim {self.out_dim}"
                )
        elif self.residual and self.in_dim != self.out_dim:
            # skip connections need matching widths; drop them quietly
            self.residual = False
        if not self.ssfg_placement:
            self.ssfg_placement = _PLACEMENTS[self.kind][0]
        elif self.ssfg_placement not in _PLACEMENTS[self.kind]:
            raise ConfigError(
                f"placement for {self.kind} must be one of {_PLACEMENTS[self.kind]}, "
                f"got {self.ssfg_placement!r}"
            )

    @property
    def head_dim(self) -> int:
        if self.kind != "gat":
            return self.out_dim
        return self.out_dim // self.heads if self.concat_heads else self.out_dim


@dataclass
class LayerParams:
    """Named parameters plus batch-norm running state for one layer."""

    params: Dict[str, Parameter]
    bn: Dict[str, BatchNormState]

    def all_parameters(self):
        return list(self.params.values())


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _bn_block(params: Dict[str, Parameter], bn: Dict[str, BatchNormState],
              name: str, dim: int, prefix: str) -> None:
    params[f"{name}_gamma"] = Parameter(np.ones(dim), name=f"{prefix}{name}_gamma")
    params[f"{name}_beta"] = Parameter(np.zeros(dim), name=f"{prefix}{name}_beta")
    bn[name] = BatchNormState(dim)


def init_layer(cfg: LayerConfig, rng: np.random.Generator, prefix: str = "") -> LayerParams:
    """Build parameters for one layer: weights uniform in +-1/sqrt(fan_in),
    biases zero, batch-norm scale 1 / shift 0."""
    params: Dict[str, Parameter] = {}
    bn: Dict[str, BatchNormState] = {}
    if cfg.kind == "sage":
        params["W"] = Parameter(uniform_init(rng, (2 * cfg.in_dim, cfg.out_dim), 2 * cfg.in_dim),
                                name=f"{prefix}W")
        if cfg.bias:
            params["b"] = Parameter(np.zeros((1, cfg.out_dim)), name=f"{prefix}b")
        if cfg.batchnorm:
            _bn_block(params, bn, "bn", cfg.out_dim, prefix)
    elif cfg.kind == "gat":
        dh = cfg.head_dim
        for k in range(cfg.heads):
            params[f"W{k}"] = Parameter(uniform_init(rng, (cfg.in_dim, dh), cfg.in_dim),
                                        name=f"{prefix}W{k}")
            if cfg.bias:
                params[f"b{k}"] = Parameter(np.zeros((1, dh)), name=f"{prefix}b{k}")
            params[f"a_dst{k}"] = Parameter(uniform_init(rng, (dh, 1), dh),
                                            name=f"{prefix}a_dst{k}")
            params[f"a_src{k}"] = Parameter(uniform_init(rng, (dh, 1), dh),
                                            name=f"{prefix}a_src{k}")
        combined = cfg.out_dim if cfg.concat_heads else cfg.head_dim
        if cfg.batchnorm:
            _bn_block(params, bn, "bn", combined, prefix)
    else:
        for name in ("U", "V", "A", "B"):
            params[name] = Parameter(uniform_init(rng, (cfg.in_dim, cfg.out_dim), cfg.in_dim),
                                     name=f"{prefix}{name}")
            if cfg.bias:
                params[f"{name.lower()}_b"] = Parameter(np.zeros((1, cfg.out_dim)),
                                                        name=f"{prefix}{name.lower()}_b")
        if cfg.batchnorm:
            _bn_block(params, bn, "bn_node", cfg.out_dim, prefix)
            _bn_block(params, bn, "bn_edge", cfg.out_dim, prefix)
    return LayerParams(params, bn)


def _linear(h: Tensor, w: Parameter, b: Optional[Parameter]) -> Tensor:
    z = matmul(h, w)
    return add(z, b) if b is not None else z


def sage_layer(g: Graph, h: Tensor, params: LayerParams, cfg: LayerConfig,
               ssfg: SsfgConfig, phase: str,
               sites: Dict[str, ScalingSite]) -> Tensor:
    """Concat self feature with the neighbor aggregate, transform, relu.

    Neighborhoods exclude the node itself; its own feature enters through
    the concatenation, so no self-loops are expected here.
    """
    p = params.params
    h_in = h
    if cfg.ssfg_placement == "input":
        h_in = ssfg_apply(h_in, ssfg, phase, sites.get("node"))
    agg = segment_reduce(gather_rows(h_in, g.src), g.dst, g.n, cfg.aggregator)
    z = _linear(concat_cols(h_in, agg), p["W"], p.get("b"))
    if cfg.batchnorm:
        z = batch_norm(z, p["bn_gamma"], p["bn_beta"], params.bn["bn"], phase)
    out = relu(z)
    if cfg.ssfg_placement == "activation":
        out = ssfg_apply(out, ssfg, phase, sites.get("node"))
    if cfg.residual:
        out = add(h, out)
    return out


def gat_layer(g: Graph, h: Tensor, params: LayerParams, cfg: LayerConfig,
              ssfg: SsfgConfig, phase: str,
              sites: Dict[str, ScalingSite]) -> Tensor:
    """Multi-head attention over incoming edges.

    Per head: score edge (j -> i) with leaky_relu(a_dst.(W h_i) +
    a_src.(W h_j)), softmax the scores per destination, sum the weighted
    transformed sources, then elu. Hidden layers concatenate heads; the
    head average (no activation) is the final-layer variant. Stochastic
    scaling hits each head's output.
    """
    deg = np.bincount(g.dst, minlength=g.n)
    if (deg == 0).any():
        bad = int(np.flatnonzero(deg == 0)[0])
        raise ValueError(
            f"node {bad} has no incoming edges; add self-loops before attention"
        )
    p = params.params
    head_outs = []
    for k in range(cfg.heads):
        z = _linear(h, p[f"W{k}"], p.get(f"b{k}"))
        s_dst = matmul(z, p[f"a_dst{k}"])
        s_src = matmul(z, p[f"a_src{k}"])
        scores = leaky_relu(add(gather_rows(s_dst, g.dst), gather_rows(s_src, g.src)), 0.2)
        weights = segment_softmax(scores, g.dst, g.n)
        agg = segment_reduce(mul(gather_rows(z, g.src), weights), g.dst, g.n, "sum")
        head = elu(agg) if cfg.concat_heads else agg
        head_outs.append(ssfg_apply(head, ssfg, phase, sites.get(f"head{k}")))
    if cfg.concat_heads:
        out = head_outs[0]
        for part in head_outs[1:]:
            out = concat_cols(out, part)
    else:
        out = head_outs[0]
        for part in head_outs[1:]:
            out = add(out, part)
        out = scale(out, 1.0 / cfg.heads)
    if cfg.batchnorm:
        out = batch_norm(out, p["bn_gamma"], p["bn_beta"], params.bn["bn"], phase)
    if cfg.residual:
        out = add(h, out)
    return out


def gatedgcn_layer(g: Graph, h: Tensor, e: Tensor, params: LayerParams,
                   cfg: LayerConfig, ssfg: SsfgConfig, phase: str,
                   sites: Dict[str, ScalingSite]) -> Tuple[Tensor, Tensor]:
    """Edge-gated convolution with explicit edge features.

    Gate logits e_hat = A h_dst + B h_src + e; gates eta = sigmoid(e_hat)
    weight the V-transformed source features, normalized by the gate sum
    plus a small epsilon. Both node and edge outputs get batch norm, relu,
    a residual connection, and stochastic scaling.
    """
    p = params.params
    hu = _linear(h, p["U"], p.get("u_b"))
    hv = _linear(h, p["V"], p.get("v_b"))
    ha = _linear(h, p["A"], p.get("a_b"))
    hb = _linear(h, p["B"], p.get("b_b"))
    e_hat = add(add(gather_rows(ha, g.dst), gather_rows(hb, g.src)), e)
    gates = sigmoid(e_hat)
    num = segment_reduce(mul(gates, gather_rows(hv, g.src)), g.dst, g.n, "sum")
    if cfg.gate_norm:
        den = add_scalar(segment_reduce(gates, g.dst, g.n, "sum"), EPS_GATE)
        mix = div(num, den)
    else:
        mix = num
    h_new = add(hu, mix)
    if cfg.batchnorm:
        h_new = batch_norm(h_new, p["bn_node_gamma"], p["bn_node_beta"],
                           params.bn["bn_node"], phase)
    h_new = relu(h_new)
    if cfg.residual:
        h_new = add(h, h_new)
    e_new = e_hat
    if cfg.batchnorm:
        e_new = batch_norm(e_new, p["bn_edge_gamma"], p["bn_edge_beta"],
                           params.bn["bn_edge"], phase)
    e_new = relu(e_new)
    if cfg.residual:
        e_new = add(e, e_new)
    if cfg.ssfg_placement in ("node_edge", "node"):
        h_new = ssfg_apply(h_new, ssfg, phase, sites.get("node"))
    if cfg.ssfg_placement in ("node_edge", "edge"):
        e_new = ssfg_apply(e_new, ssfg, phase, sites.get("edge"))
    return h_new, e_new
