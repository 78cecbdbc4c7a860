"""Model assembly: encoder, a stack of message-passing layers, readout.

A GraphModel owns its parameters, batch-norm state, and the per-site RNG
streams for stochastic scaling and dropout. Forward passes are pure
given (graph, phase) apart from consuming those streams in train phase
and updating batch-norm running statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .autodiff import (
    BatchNormState,
    Parameter,
    Tensor,
    add,
    matmul,
    relu,
    segment_reduce,
)
from .errors import ConfigError, ShapeError
from .graph import Graph, add_self_loops
from .layers import (
    KINDS,
    LayerConfig,
    LayerParams,
    uniform_init,
    gat_layer,
    gatedgcn_layer,
    init_layer,
    sage_layer,
)
from .rng import RngHub
from .ssfg import DropoutConfig, ScalingSite, SsfgConfig, dropout_apply

TASKS = ("node-class", "graph-class", "graph-regress")


@dataclass
class ModelConfig:
    """Architecture settings shared by every layer in the stack."""

    task: str
    architecture: str
    in_dim: int
    hidden_dim: int
    out_dim: int
    layers: int
    heads: int = 4
    aggregator: str = "mean"
    residual: bool = True
    batchnorm: bool = True
    bias: bool = True
    ssfg: SsfgConfig = field(default_factory=SsfgConfig)
    dropout: Optional[DropoutConfig] = None
    ssfg_placement: str = ""
    edge_in_dim: int = 1

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.architecture not in KINDS:
            raise ConfigError(f"architecture must be one of {KINDS}, got {self.architecture!r}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if min(self.in_dim, self.hidden_dim, self.out_dim) < 1:
            raise ConfigError("all dims must be >= 1")


def prepare_graph(g: Graph, architecture: str) -> Graph:
    """One-time structural preprocessing before feeding a graph to a model.

    Attention and edge-gated layers get self-loops; loop edges carry
    zero edge features, real edges default to a constant 1 when the
    dataset supplies none. Graphsage works on the bare graph.
    """
    if architecture == "sage":
        return g
    if architecture == "gatedgcn" and g.edge_attr is None:
        g = Graph(g.n, g.src, g.dst, g.x, np.ones((g.num_edges, 1)), g.y,
                  graph_ids=g.graph_ids, num_graphs=g.num_graphs)
    return add_self_loops(g)


def _site_roles(architecture: str, heads: int) -> Tuple[str, ...]:
    if architecture == "sage":
        return ("node",)
    if architecture == "gat":
        return tuple(f"head{k}" for k in range(heads))
    return ("node", "edge")


def readout(task: str, h: Tensor, params: Dict[str, Parameter],
            graph_ids: Optional[np.ndarray] = None, num_graphs: int = 1) -> Tensor:
    """Map backbone features to predictions.

    Node classification: a per-node linear map to K logits. Graph-level
    tasks: mean-pool nodes per graph, then a two-layer head producing K
    logits or one scalar per graph.
    """
    if task == "node-class":
        return add(matmul(h, params["W_out"]), params["b_out"])
    ids = graph_ids if graph_ids is not None else np.zeros(h.data.shape[0], dtype=np.int64)
    pooled = segment_reduce(h, ids, num_graphs, "mean")
    z = relu(add(matmul(pooled, params["W1"]), params["b1"]))
    return add(matmul(z, params["W2"]), params["b2"])


class GraphModel:
    """A full trainable stack bound to one RNG hub."""

    def __init__(self, cfg: ModelConfig, hub: RngHub, capture_factors: bool = False):
        self.cfg = cfg
        self.hub = hub
        enc_rng = hub.stream("init", "encoder")
        self.encoder: Dict[str, Parameter] = {
            "W_in": Parameter(uniform_init(enc_rng, (cfg.in_dim, cfg.hidden_dim), cfg.in_dim),
                              name="enc.W_in"),
            "b_in": Parameter(np.zeros((1, cfg.hidden_dim)), name="enc.b_in"),
        }
        if cfg.architecture == "gatedgcn":
            self.encoder["W_e"] = Parameter(
                uniform_init(enc_rng, (cfg.edge_in_dim, cfg.hidden_dim), cfg.edge_in_dim),
                name="enc.W_e")
            self.encoder["b_e"] = Parameter(np.zeros((1, cfg.hidden_dim)), name="enc.b_e")

        self.layer_cfgs: List[LayerConfig] = []
        self.layer_params: List[LayerParams] = []
        self.sites: List[Dict[str, ScalingSite]] = []
        self._dropout_rngs = []
        for i in range(cfg.layers):
            lc = LayerConfig(
                kind=cfg.architecture,
                in_dim=cfg.hidden_dim,
                out_dim=cfg.hidden_dim,
                heads=cfg.heads,
                aggregator=cfg.aggregator,
                residual=cfg.residual,
                batchnorm=cfg.batchnorm,
                bias=cfg.bias,
                concat_heads=True,
                ssfg_placement=cfg.ssfg_placement,
            )
            self.layer_cfgs.append(lc)
            self.layer_params.append(init_layer(lc, hub.stream("init", "layer", i),
                                                prefix=f"layer{i}."))
            self.sites.append({
                role: ScalingSite(hub.stream("ssfg", i, role, "fwd"),
                                  hub.stream("ssfg", i, role, "bwd"),
                                  capture=capture_factors)
                for role in _site_roles(cfg.architecture, cfg.heads)
            })
            self._dropout_rngs.append(hub.stream("dropout", i))

        head_rng = hub.stream("init", "readout")
        if cfg.task == "node-class":
            self.head = {
                "W_out": Parameter(uniform_init(head_rng, (cfg.hidden_dim, cfg.out_dim),
                                            cfg.hidden_dim), name="head.W_out"),
                "b_out": Parameter(np.zeros((1, cfg.out_dim)), name="head.b_out"),
            }
        else:
            mid = max(cfg.hidden_dim // 2, 4)
            self.head = {
                "W1": Parameter(uniform_init(head_rng, (cfg.hidden_dim, mid), cfg.hidden_dim),
                                name="head.W1"),
                "b1": Parameter(np.zeros((1, mid)), name="head.b1"),
                "W2": Parameter(uniform_init(head_rng, (mid, cfg.out_dim), mid), name="head.W2"),
                "b2": Parameter(np.zeros((1, cfg.out_dim)), name="head.b2"),
            }
        self.last_hidden: Optional[List[np.ndarray]] = None

    # -- parameter/state plumbing ------------------------------------------

    def parameters(self) -> List[Parameter]:
        out = list(self.encoder.values())
        for lp in self.layer_params:
            out.extend(lp.params.values())
        out.extend(self.head.values())
        return out

    def bn_states(self) -> List[Tuple[str, BatchNormState]]:
        out = []
        for i, lp in enumerate(self.layer_params):
            for name, state in lp.bn.items():
                out.append((f"layer{i}.{name}", state))
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        snap = {p.name: p.data.copy() for p in self.parameters()}
        for name, st in self.bn_states():
            snap[f"{name}.running_mean"] = st.running_mean.copy()
            snap[f"{name}.running_var"] = st.running_var.copy()
        return snap

    def restore(self, snap: Dict[str, np.ndarray]) -> None:
        for p in self.parameters():
            p.data[...] = snap[p.name]
        for name, st in self.bn_states():
            st.running_mean[...] = snap[f"{name}.running_mean"]
            st.running_var[...] = snap[f"{name}.running_var"]

    # -- forward -------------------------------------------------------------

    def forward(self, g: Graph, phase: str, collect_hidden: bool = False,
                test_scale: Optional[float] = None) -> Tensor:
        if g.x.shape[1] != self.cfg.in_dim:
            raise ShapeError(
                f"graph features have dim {g.x.shape[1]}, model expects {self.cfg.in_dim}"
            )
        ssfg_cfg = self.cfg.ssfg
        if test_scale is not None:
            ssfg_cfg = replace(ssfg_cfg, test_scale=test_scale)
        h = add(matmul(Tensor(g.x), self.encoder["W_in"]), self.encoder["b_in"])
        e = None
        if self.cfg.architecture == "gatedgcn":
            feats = g.edge_attr if g.edge_attr is not None else np.ones((g.num_edges, 1))
            e = add(matmul(Tensor(feats), self.encoder["W_e"]), self.encoder["b_e"])
        hiddens: List[np.ndarray] = []
        for i, (lc, lp) in enumerate(zip(self.layer_cfgs, self.layer_params)):
            if lc.kind == "sage":
                h = sage_layer(g, h, lp, lc, ssfg_cfg, phase, self.sites[i])
            elif lc.kind == "gat":
                h = gat_layer(g, h, lp, lc, ssfg_cfg, phase, self.sites[i])
            else:
                h, e = gatedgcn_layer(g, h, e, lp, lc, ssfg_cfg, phase, self.sites[i])
            h = dropout_apply(h, self.cfg.dropout, phase, self._dropout_rngs[i])
            if collect_hidden:
                hiddens.append(h.data)
        self.last_hidden = hiddens if collect_hidden else None
        return readout(self.cfg.task, h, self.head, g.graph_ids, g.num_graphs)
