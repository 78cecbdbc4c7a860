"""Synthetic datasets and a canonical JSON interchange format.

Three desk-scale tasks: semi-supervised community labeling on stochastic
block models (node classification), two-regime SBM discrimination (graph
classification), and a counting-rule target with Gaussian noise (graph
regression). Files are written in one canonical serialization (sorted
keys, compact separators, 17-significant-digit floats) so that
save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, DataFormatError
from .graph import Graph, connected_components
from .rng import stream

TASKS = ("node-class", "graph-class", "graph-regress")


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------


def _write_json(o, out: List[str]) -> None:
    if o is None:
        out.append("null")
    elif o is True:
        out.append("true")
    elif o is False:
        out.append("false")
    elif isinstance(o, (int, np.integer)):
        out.append(str(int(o)))
    elif isinstance(o, (float, np.floating)):
        x = float(o)
        if not math.isfinite(x):
            raise DataFormatError(f"non-finite value {x} cannot be serialized")
        out.append("0" if x == 0.0 else format(x, ".17g"))
    elif isinstance(o, str):
        out.append(json.dumps(o, ensure_ascii=False))
    elif isinstance(o, dict):
        out.append("{")
        for i, key in enumerate(sorted(o)):
            if not isinstance(key, str):
                raise DataFormatError(f"object keys must be strings, got {key!r}")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _write_json(o[key], out)
        out.append("}")
    elif isinstance(o, (list, tuple, np.ndarray)):
        seq = o.tolist() if isinstance(o, np.ndarray) else o
        out.append("[")
        for i, item in enumerate(seq):
            if i:
                out.append(",")
            _write_json(item, out)
        out.append("]")
    else:
        raise DataFormatError(f"cannot serialize {type(o).__name__}")


def canonical_json(obj) -> str:
    """Serialize to the one canonical form used for all artifact files."""
    out: List[str] = []
    _write_json(obj, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# dataset container
# ---------------------------------------------------------------------------


@dataclass
class GraphRecord:
    """One stored graph: undirected edge pairs (each stored once), features,
    and a node-label array, class id, or regression target."""

    n: int
    edges: List[Tuple[int, int]]
    x: np.ndarray
    y: object


@dataclass
class DatasetFile:
    task: str
    feature_dim: int
    graphs: List[GraphRecord]
    splits: Dict[str, List[int]]
    meta: Dict = field(default_factory=dict)


def to_graph(rec: GraphRecord) -> Graph:
    """Materialize a record as a directed Graph, mirroring undirected pairs."""
    pairs = np.asarray(rec.edges, dtype=np.int64).reshape(-1, 2)
    non_loop = pairs[pairs[:, 0] != pairs[:, 1]]
    src = np.concatenate([pairs[:, 0], non_loop[:, 1]])
    dst = np.concatenate([pairs[:, 1], non_loop[:, 0]])
    y = np.asarray(rec.y) if isinstance(rec.y, (list, np.ndarray)) else np.asarray([rec.y])
    return Graph(rec.n, src, dst, rec.x, None, y)


def _dataset_payload(d: DatasetFile) -> Dict:
    payload = {
        "task": d.task,
        "feature_dim": d.feature_dim,
        "graphs": [
            {"n": g.n,
             "edges": [[int(a), int(b)] for a, b in g.edges],
             "x": g.x,
             "y": g.y}
            for g in d.graphs
        ],
        "splits": {k: [int(i) for i in v] for k, v in d.splits.items()},
    }
    if d.meta:
        payload["meta"] = d.meta
    return payload


def save_dataset(d: DatasetFile, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(_dataset_payload(d)))


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DataFormatError(msg)


def load_dataset(path) -> DatasetFile:
    """Parse and fully validate a dataset file.

    Any malformed record raises DataFormatError naming the graph (and
    edge/row) at fault; nothing partial is returned.
    """
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"parse error: {exc}") from exc
    _require(isinstance(raw, dict), "top level must be an object")
    for key in ("task", "feature_dim", "graphs", "splits"):
        _require(key in raw, f"missing top-level key {key!r}")
    task = raw["task"]
    _require(task in TASKS, f"unknown task {task!r}")
    fdim = raw["feature_dim"]
    _require(isinstance(fdim, int) and fdim >= 1, f"feature_dim must be a positive int, got {fdim!r}")

    graphs: List[GraphRecord] = []
    _require(isinstance(raw["graphs"], list) and raw["graphs"],
             "graphs must be a non-empty list")
    for gi, rec in enumerate(raw["graphs"]):
        _require(isinstance(rec, dict), f"graph {gi}: record must be an object")
        for key in ("n", "edges", "x", "y"):
            _require(key in rec, f"graph {gi}: missing key {key!r}")
        n = rec["n"]
        _require(isinstance(n, int) and n >= 1, f"graph {gi}: n must be a positive int")
        edges = rec["edges"]
        _require(isinstance(edges, list), f"graph {gi}: edges must be a list")
        pairs: List[Tuple[int, int]] = []
        for ei, pair in enumerate(edges):
            _require(isinstance(pair, list) and len(pair) == 2
                     and all(isinstance(v, int) for v in pair),
                     f"graph {gi}, edge {ei}: must be a pair of ints")
            a, b = pair
            for v in (a, b):
                _require(0 <= v < n,
                         f"graph {gi}, edge {ei}: index {v} outside [0, {n})")
            pairs.append((a, b))
        x_rows = rec["x"]
        _require(isinstance(x_rows, list) and len(x_rows) == n,
                 f"graph {gi}: x must list {n} rows")
        for ri, row in enumerate(x_rows):
            _require(isinstance(row, list) and len(row) == fdim,
                     f"graph {gi}, row {ri}: feature row must have {fdim} entries")
            for v in row:
                _require(isinstance(v, (int, float)) and not isinstance(v, bool)
                         and math.isfinite(v),
                         f"graph {gi}, row {ri}: non-finite or non-numeric feature")
        x = np.asarray(x_rows, dtype=np.float64)
        y = rec["y"]
        if task == "node-class":
            _require(isinstance(y, list) and len(y) == n,
                     f"graph {gi}: y must list {n} node labels")
            _require(all(isinstance(v, int) and v >= 0 for v in y),
                     f"graph {gi}: node labels must be non-negative ints")
            y = np.asarray(y, dtype=np.int64)
        elif task == "graph-class":
            _require(isinstance(y, int) and y >= 0,
                     f"graph {gi}: y must be a non-negative class int")
        else:
            _require(isinstance(y, (int, float)) and not isinstance(y, bool)
                     and math.isfinite(y),
                     f"graph {gi}: y must be a finite number")
            y = float(y)
        graphs.append(GraphRecord(n, pairs, x, y))

    splits = raw["splits"]
    _require(isinstance(splits, dict) and set(splits) == {"train", "val", "test"},
             "splits must have exactly the keys train/val/test")
    seen: set = set()
    total = len(graphs)
    for name in ("train", "val", "test"):
        idxs = splits[name]
        _require(isinstance(idxs, list), f"split {name!r} must be a list")
        for i in idxs:
            _require(isinstance(i, int) and 0 <= i < total,
                     f"split {name!r}: index {i!r} outside [0, {total})")
            _require(i not in seen, f"split {name!r}: index {i} appears twice")
            seen.add(i)
    _require(len(seen) == total, "splits must cover every graph exactly once")
    meta = raw.get("meta", {})
    _require(isinstance(meta, dict), "meta must be an object")
    return DatasetFile(task, fdim, graphs,
                       {k: list(splits[k]) for k in ("train", "val", "test")}, meta)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SbmSpec:
    """Community-labeling task on stochastic block models."""

    num_graphs: int = 400
    nodes_min: int = 40
    nodes_max: int = 60
    communities: int = 6
    p_intra: float = 0.5
    q_inter: float = 0.05
    labeled_fraction: float = 0.2
    seed: int = 0
    train_frac: float = 0.75
    val_frac: float = 0.125

    def __post_init__(self) -> None:
        if not (0.0 <= self.q_inter < self.p_intra <= 1.0):
            raise ConfigError(
                f"need 0 <= q_inter < p_intra <= 1, got q={self.q_inter}, p={self.p_intra}"
            )
        if self.communities < 2:
            raise ConfigError(f"communities must be >= 2, got {self.communities}")
        if not (0.0 <= self.labeled_fraction <= 1.0):
            raise ConfigError(f"labeled_fraction must be in [0,1], got {self.labeled_fraction}")
        _check_common(self.num_graphs, self.nodes_min, self.nodes_max,
                      self.train_frac, self.val_frac)
        if self.nodes_min < self.communities:
            raise ConfigError("nodes_min must be at least the community count")


@dataclass(frozen=True)
class SbmGraphSpec:
    """Two-regime SBM discrimination: graph label = generating regime."""

    num_graphs: int = 200
    nodes_min: int = 30
    nodes_max: int = 45
    communities: int = 2
    p_intra_a: float = 0.6
    q_inter_a: float = 0.1
    p_intra_b: float = 0.3
    q_inter_b: float = 0.25
    degree_buckets: int = 8
    seed: int = 0
    train_frac: float = 0.75
    val_frac: float = 0.125

    def __post_init__(self) -> None:
        for p, q, tag in ((self.p_intra_a, self.q_inter_a, "a"),
                          (self.p_intra_b, self.q_inter_b, "b")):
            if not (0.0 <= q <= p <= 1.0):
                raise ConfigError(f"regime {tag}: need 0 <= q <= p <= 1, got q={q}, p={p}")
        if self.communities < 1:
            raise ConfigError(f"communities must be >= 1, got {self.communities}")
        if self.degree_buckets < 2:
            raise ConfigError(f"degree_buckets must be >= 2, got {self.degree_buckets}")
        _check_common(self.num_graphs, self.nodes_min, self.nodes_max,
                      self.train_frac, self.val_frac)


@dataclass(frozen=True)
class RegressionSpec:
    """Counting-rule regression: y = (reactive edge count)/n + noise."""

    num_graphs: int = 200
    nodes_min: int = 12
    nodes_max: int = 24
    node_types: int = 5
    edge_prob: float = 0.3
    target_rule: str = "reactive-pairs"
    reactive_pairs: Tuple[Tuple[int, int], ...] = ((0, 1), (2, 3))
    noise_sd: float = 0.02
    seed: int = 0
    train_frac: float = 0.75
    val_frac: float = 0.125

    def __post_init__(self) -> None:
        if self.node_types < 2:
            raise ConfigError(f"node_types must be >= 2, got {self.node_types}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not (0.0 <= self.edge_prob <= 1.0):
            raise ConfigError(f"edge_prob must be in [0,1], got {self.edge_prob}")
        for a, b in self.reactive_pairs:
            if not (0 <= a < self.node_types and 0 <= b < self.node_types):
                raise ConfigError(f"reactive pair ({a},{b}) outside type range")
        _check_common(self.num_graphs, self.nodes_min, self.nodes_max,
                      self.train_frac, self.val_frac)


def _check_common(num_graphs, nodes_min, nodes_max, train_frac, val_frac) -> None:
    if num_graphs < 1:
        raise ConfigError(f"num_graphs must be >= 1, got {num_graphs}")
    if not (1 <= nodes_min <= nodes_max):
        raise ConfigError(f"need 1 <= nodes_min <= nodes_max, got {nodes_min}..{nodes_max}")
    if not (0 < train_frac < 1 and 0 <= val_frac < 1 and train_frac + val_frac < 1):
        raise ConfigError(f"bad split fractions train={train_frac}, val={val_frac}")


def _near_equal_labels(n: int, k: int) -> np.ndarray:
    base, rem = divmod(n, k)
    sizes = [base + 1] * rem + [base] * (k - rem)
    return np.repeat(np.arange(k), sizes)


def _block_edges(rng: np.random.Generator, labels: np.ndarray,
                 p_intra: float, q_inter: float) -> List[Tuple[int, int]]:
    iu, ju = np.triu_indices(labels.size, k=1)
    prob = np.where(labels[iu] == labels[ju], p_intra, q_inter)
    keep = rng.random(prob.size) < prob
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def _repair_connectivity(n: int, pairs: List[Tuple[int, int]],
                         rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Bridge consecutive components with one edge each (count - 1 edges)."""
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    comps = connected_components(n, arr[:, 0], arr[:, 1])
    extra = []
    for left, right in zip(comps, comps[1:]):
        a = int(left[rng.integers(left.size)])
        b = int(right[rng.integers(right.size)])
        extra.append((a, b))
    return extra


def _make_splits(num_graphs: int, seed: int, train_frac: float,
                 val_frac: float) -> Dict[str, List[int]]:
    order = stream(seed, "split").permutation(num_graphs)
    n_tr = int(round(train_frac * num_graphs))
    n_val = int(round(val_frac * num_graphs))
    return {
        "train": sorted(int(i) for i in order[:n_tr]),
        "val": sorted(int(i) for i in order[n_tr:n_tr + n_val]),
        "test": sorted(int(i) for i in order[n_tr + n_val:]),
    }


def gen_sbm_node_task(spec: SbmSpec) -> DatasetFile:
    """Community classification with partially revealed labels.

    Features are one-hot community indicators on a labeled_fraction
    subset (at least one node per community when the budget is nonzero)
    and zero elsewhere; labels are the community ids.
    """
    k = spec.communities
    graphs = []
    for gi in range(spec.num_graphs):
        rng = stream(spec.seed, "sbm-node", gi)
        n = int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
        labels = _near_equal_labels(n, k)
        pairs = _block_edges(rng, labels, spec.p_intra, spec.q_inter)
        pairs += _repair_connectivity(n, pairs, rng)
        x = np.zeros((n, k))
        budget = int(round(spec.labeled_fraction * n))
        if budget > 0:
            budget = max(budget, k)
            chosen = [int(np.flatnonzero(labels == c)[rng.integers((labels == c).sum())])
                      for c in range(k)]
            rest = np.setdiff1d(np.arange(n), np.asarray(chosen))
            if budget > k:
                more = rng.choice(rest, size=min(budget - k, rest.size), replace=False)
                chosen.extend(int(i) for i in more)
            x[chosen, labels[chosen]] = 1.0
        graphs.append(GraphRecord(n, pairs, x, labels.tolist()))
    splits = _make_splits(spec.num_graphs, spec.seed, spec.train_frac, spec.val_frac)
    return DatasetFile("node-class", k, graphs, splits, {"num_classes": k})


def gen_sbm_graph_task(spec: SbmGraphSpec) -> DatasetFile:
    """Binary graph classification by generating regime.

    Graphs alternate between regime A and regime B; node features are a
    one-hot bucket of relative degree (bucket = floor(T * deg / n),
    clamped), so the classifier has to read connectivity statistics.
    """
    t = spec.degree_buckets
    graphs = []
    for gi in range(spec.num_graphs):
        rng = stream(spec.seed, "sbm-graph", gi)
        regime = gi % 2
        p, q = ((spec.p_intra_a, spec.q_inter_a) if regime == 0
                else (spec.p_intra_b, spec.q_inter_b))
        n = int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
        labels = _near_equal_labels(n, spec.communities)
        pairs = _block_edges(rng, labels, p, q)
        pairs += _repair_connectivity(n, pairs, rng)
        arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        deg = np.bincount(arr.ravel(), minlength=n)
        bucket = np.minimum((t * deg) // n, t - 1)
        x = np.zeros((n, t))
        x[np.arange(n), bucket] = 1.0
        graphs.append(GraphRecord(n, pairs, x, int(regime)))
    splits = _make_splits(spec.num_graphs, spec.seed, spec.train_frac, spec.val_frac)
    return DatasetFile("graph-class", t, graphs, splits, {"num_classes": 2})


def _reactive_count(pairs: Sequence[Tuple[int, int]], types: np.ndarray,
                    reactive: set) -> int:
    return sum(1 for a, b in pairs
               if (min(types[a], types[b]), max(types[a], types[b])) in reactive)


def _reactive_set(pairs: Sequence[Tuple[int, int]]) -> set:
    return {(min(a, b), max(a, b)) for a, b in pairs}


def gen_regression_task(spec: RegressionSpec) -> DatasetFile:
    """Graph regression on a transparent counting rule.

    Nodes get uniform random types (one-hot features); the target is the
    number of edges whose endpoint types form a reactive pair, divided by
    n, plus Gaussian noise. The rule is stored in meta so an oracle can
    be evaluated against the file.
    """
    t = spec.node_types
    reactive = _reactive_set(spec.reactive_pairs)
    graphs = []
    for gi in range(spec.num_graphs):
        rng = stream(spec.seed, "regression", gi)
        n = int(rng.integers(spec.nodes_min, spec.nodes_max + 1))
        types = rng.integers(0, t, size=n)
        iu, ju = np.triu_indices(n, k=1)
        keep = rng.random(iu.size) < spec.edge_prob
        pairs = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        pairs += _repair_connectivity(n, pairs, rng)
        x = np.zeros((n, t))
        x[np.arange(n), types] = 1.0
        y = _reactive_count(pairs, types, reactive) / n
        if spec.noise_sd > 0:
            y += spec.noise_sd * rng.standard_normal()
        graphs.append(GraphRecord(n, pairs, x, float(y)))
    splits = _make_splits(spec.num_graphs, spec.seed, spec.train_frac, spec.val_frac)
    meta = {
        "target_rule": spec.target_rule,
        "reactive_pairs": [[int(a), int(b)] for a, b in sorted(_reactive_set(spec.reactive_pairs))],
        "noise_sd": spec.noise_sd,
        "node_types": t,
    }
    return DatasetFile("graph-regress", t, graphs, splits, meta)


def regression_oracle(d: DatasetFile) -> np.ndarray:
    """Noise-free rule predictions recomputed from each stored graph."""
    if d.task != "graph-regress" or "reactive_pairs" not in d.meta:
        raise ConfigError("dataset does not carry a regression rule")
    reactive = {(min(a, b), max(a, b)) for a, b in d.meta["reactive_pairs"]}
    preds = []
    for rec in d.graphs:
        types = np.argmax(rec.x, axis=1)
        preds.append(_reactive_count(rec.edges, types, reactive) / rec.n)
    return np.asarray(preds)
