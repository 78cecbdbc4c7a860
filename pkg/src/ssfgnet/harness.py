"""Experiment harness: optimizer, scheduler, metrics, training protocol.

One experiment = one config trained once per seed. Each run uses Adam
with reduce-on-plateau (halve the rate after `patience` epochs without
validation improvement, stop once the rate drops below lr_min), tracks
the best-validation-loss parameter snapshot, and reports test metrics at
that snapshot. Runs are bit-deterministic given the config.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import Parameter, backward, l1_loss, softmax_cross_entropy
from .data import DatasetFile, load_dataset, to_graph, canonical_json
from .diagnostics import mean_pairwise_distance, smoothness_report
from .errors import ConfigError, DataFormatError
from .graph import Graph, batch_graphs
from .model import GraphModel, ModelConfig, prepare_graph
from .rng import RngHub
from .ssfg import DropoutConfig, SsfgConfig

ARCHITECTURES = ("sage", "gat", "gatedgcn")


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    architecture: str = "gatedgcn"
    layers: int = 4
    hidden_dim: int = 16
    heads: int = 4
    aggregator: str = "mean"
    residual: bool = True
    batchnorm: bool = True
    bias: bool = True
    ssfg: SsfgConfig = field(default_factory=SsfgConfig)
    dropout: Optional[DropoutConfig] = None
    ssfg_placement: str = ""
    lr_init: float = 1e-3
    lr_reduce_factor: float = 2.0
    patience: int = 10
    lr_min: float = 1e-6
    max_epochs: int = 200
    seeds: Tuple[int, ...] = (0, 1, 2, 3)
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 32
    diag_every: int = 10

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if not (self.lr_init > self.lr_min > 0):
            raise ConfigError(f"need lr_init > lr_min > 0, got {self.lr_init}, {self.lr_min}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.lr_reduce_factor <= 1:
            raise ConfigError(f"lr_reduce_factor must exceed 1, got {self.lr_reduce_factor}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.diag_every < 1:
            raise ConfigError(f"diag_every must be >= 1, got {self.diag_every}")


_CONFIG_FIELDS = (
    "dataset", "architecture", "layers", "hidden_dim", "heads", "aggregator",
    "residual", "batchnorm", "bias", "ssfg", "dropout", "ssfg_placement",
    "lr_init", "lr_reduce_factor", "patience", "lr_min", "max_epochs",
    "seeds", "adam_betas", "adam_eps", "batch_size", "diag_every",
)


def config_to_dict(cfg: ExperimentConfig) -> Dict:
    alpha = cfg.ssfg.alpha
    return {
        "dataset": cfg.dataset,
        "architecture": cfg.architecture,
        "layers": cfg.layers,
        "hidden_dim": cfg.hidden_dim,
        "heads": cfg.heads,
        "aggregator": cfg.aggregator,
        "residual": cfg.residual,
        "batchnorm": cfg.batchnorm,
        "bias": cfg.bias,
        "ssfg": {
            "alpha": "Infinity" if alpha == math.inf else alpha,
            "mode": cfg.ssfg.mode,
            "test_scale": cfg.ssfg.test_scale,
        },
        "dropout": None if cfg.dropout is None else {"p": cfg.dropout.p},
        "ssfg_placement": cfg.ssfg_placement,
        "lr_init": cfg.lr_init,
        "lr_reduce_factor": cfg.lr_reduce_factor,
        "patience": cfg.patience,
        "lr_min": cfg.lr_min,
        "max_epochs": cfg.max_epochs,
        "seeds": list(cfg.seeds),
        "adam_betas": list(cfg.adam_betas),
        "adam_eps": cfg.adam_eps,
        "batch_size": cfg.batch_size,
        "diag_every": cfg.diag_every,
    }


def config_from_dict(d: Dict) -> ExperimentConfig:
    unknown = set(d) - set(_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "dataset" not in d:
        raise ConfigError("config must set 'dataset'")
    kw = dict(d)
    if "ssfg" in kw and kw["ssfg"] is not None:
        s = dict(kw["ssfg"])
        if "alpha" in s:
            s["alpha"] = float(s["alpha"])
        kw["ssfg"] = SsfgConfig(**s)
    elif "ssfg" in kw:
        kw["ssfg"] = SsfgConfig()
    if kw.get("dropout") is not None:
        kw["dropout"] = DropoutConfig(**kw["dropout"])
    if "seeds" in kw:
        kw["seeds"] = tuple(int(s) for s in kw["seeds"])
    if "adam_betas" in kw:
        kw["adam_betas"] = tuple(float(b) for b in kw["adam_betas"])
    return ExperimentConfig(**kw)


def apply_overrides(raw: Dict, overrides: Sequence[str]) -> Dict:
    """Apply ``key=value`` strings (dotted keys reach nested objects);
    values are parsed as JSON when possible, else taken as strings."""
    out = json.loads(json.dumps(raw))  # deep copy of plain JSON data
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return out


# ---------------------------------------------------------------------------
# optimizer and scheduler
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0


def adam_init(params: Sequence[Parameter]) -> AdamState:
    return AdamState([np.zeros_like(p.data) for p in params],
                     [np.zeros_like(p.data) for p in params])


def adam_step(params: Sequence[Parameter], grads: Sequence[Optional[np.ndarray]],
              state: AdamState, lr: float,
              betas: Tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> AdamState:
    """One in-place Adam update with bias correction."""
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


@dataclass
class PlateauState:
    """Reduce-on-plateau bookkeeping. ``threshold`` is the absolute decrease
    that counts as improvement."""

    lr: float
    factor: float = 2.0
    patience: int = 10
    lr_min: float = 1e-6
    threshold: float = 1e-6
    best: float = math.inf
    bad_epochs: int = 0


def plateau_update(state: PlateauState, val_loss: float) -> Tuple[float, bool]:
    """Advance the scheduler by one epoch; returns (lr, stop flag)."""
    if not math.isfinite(val_loss):
        raise ValueError(f"validation loss must be finite, got {val_loss}")
    if val_loss <= state.best - state.threshold:
        state.best = val_loss
        state.bad_epochs = 0
    else:
        state.bad_epochs += 1
        if state.bad_epochs >= state.patience:
            state.lr /= state.factor
            state.bad_epochs = 0
    return state.lr, state.lr < state.lr_min


# ---------------------------------------------------------------------------
# losses and metrics
# ---------------------------------------------------------------------------


def class_weights_from_counts(labels: np.ndarray, k: int) -> np.ndarray:
    """w_c = n_total / (K * n_c) over the classes present; absent classes
    get weight 0 (they contribute no samples anyway)."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    present = counts > 0
    w = np.zeros(k)
    w[present] = labels.size / (k * counts[present])
    return w


def loss(task: str, pred, targets, class_weights: Optional[np.ndarray] = None):
    """Scalar training loss: class-weighted cross-entropy for the two
    classification tasks, mean absolute error for regression."""
    if task in ("node-class", "graph-class"):
        return softmax_cross_entropy(pred, targets, class_weights)
    if task == "graph-regress":
        t = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
        return l1_loss(pred, t)
    raise ConfigError(f"unknown task {task!r}")


def accuracy(preds: np.ndarray, labels: np.ndarray) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.size == 0:
        raise ValueError("empty input")
    return float((preds == labels).mean())


def weighted_accuracy(preds: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Mean per-class recall over the classes present in ``labels``."""
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("empty input")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"labels outside [0, {k})")
    recalls = []
    for c in range(k):
        mask = labels == c
        if mask.any():
            recalls.append(float((preds[mask] == c).mean()))
    return float(np.mean(recalls))


def mae(preds: np.ndarray, targets: np.ndarray) -> float:
    preds = np.asarray(preds, dtype=np.float64).ravel()
    targets = np.asarray(targets, dtype=np.float64).ravel()
    if preds.size == 0:
        raise ValueError("empty input")
    return float(np.abs(preds - targets).mean())


# ---------------------------------------------------------------------------
# metrics records
# ---------------------------------------------------------------------------


@dataclass
class MetricsRecord:
    epoch: int
    split: str
    loss: float
    metric: float
    lr: float
    seconds: float
    smoothness: Optional[List[Dict]] = None

    def to_dict(self) -> Dict:
        d = {"epoch": self.epoch, "split": self.split, "loss": self.loss,
             "metric": self.metric, "lr": self.lr, "seconds": self.seconds}
        if self.smoothness is not None:
            d["smoothness"] = self.smoothness
        return d


@dataclass
class RunResult:
    """One seed's training outcome.

    ``test_diversity`` is the last-layer feature spread of the restored
    best-validation model over the test graphs; ``final_diversity`` is the
    same quantity for the end-of-training parameters, captured before the
    best snapshot is restored.
    """

    seed: int
    records: List[MetricsRecord]
    best_epoch: int
    best_val_loss: float
    split_loss: Dict[str, float]
    split_metric: Dict[str, float]
    test_diversity: float
    final_diversity: float
    snapshot: Dict[str, np.ndarray]
    model: GraphModel


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: List[RunResult]
    summary: Dict


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def _output_dim(ds: DatasetFile) -> int:
    if ds.task == "graph-regress":
        return 1
    if "num_classes" in ds.meta:
        return int(ds.meta["num_classes"])
    if ds.task == "node-class":
        return int(max(int(np.max(g.y)) for g in ds.graphs)) + 1
    return int(max(int(g.y) for g in ds.graphs)) + 1


def _targets(task: str, graphs: List[Graph], idxs: Sequence[int]):
    if task == "node-class":
        return np.concatenate([graphs[i].y for i in idxs])
    return np.asarray([graphs[i].y[0] for i in idxs])


def _train_class_weights(ds: DatasetFile, graphs: List[Graph], k: int) -> Optional[np.ndarray]:
    if ds.task == "graph-regress":
        return None
    train = ds.splits["train"]
    labels = _targets(ds.task, graphs, train)
    return class_weights_from_counts(labels, k)


def _metric_of(task: str, pred: np.ndarray, targets, k: int) -> float:
    if task == "node-class":
        return weighted_accuracy(pred.argmax(axis=1), targets, k)
    if task == "graph-class":
        return accuracy(pred.argmax(axis=1), targets)
    return mae(pred, targets)


def _eval_batches(task: str, idxs: Sequence[int], batch_size: int) -> List[List[int]]:
    if task == "node-class":
        return [[i] for i in idxs]
    return [list(idxs[a:a + batch_size]) for a in range(0, len(idxs), batch_size)]


def evaluate(model: GraphModel, graphs: List[Graph], task: str, idxs: Sequence[int],
             k: int, class_weights: Optional[np.ndarray], batch_size: int,
             test_scale: Optional[float] = None) -> Tuple[float, float]:
    """Loss and metric over a split, in eval phase (no stochastic scaling,
    batch-norm running statistics)."""
    loss_sum = 0.0
    weight_sum = 0.0
    all_preds = []
    all_targets = []
    for batch in _eval_batches(task, idxs, batch_size):
        g = graphs[batch[0]] if len(batch) == 1 else batch_graphs([graphs[i] for i in batch])
        pred = model.forward(g, "eval", test_scale=test_scale)
        targets = _targets(task, graphs, batch)
        ls = loss(task, pred, targets, class_weights)
        w = len(targets)
        loss_sum += float(ls.data) * w
        weight_sum += w
        all_preds.append(pred.data)
        all_targets.append(np.asarray(targets))
    preds = np.concatenate(all_preds, axis=0)
    targets = np.concatenate(all_targets, axis=0)
    return loss_sum / weight_sum, _metric_of(task, preds, targets, k)


def _model_config(cfg: ExperimentConfig, ds: DatasetFile, out_dim: int) -> ModelConfig:
    return ModelConfig(
        task=ds.task,
        architecture=cfg.architecture,
        in_dim=ds.feature_dim,
        hidden_dim=cfg.hidden_dim,
        out_dim=out_dim,
        layers=cfg.layers,
        heads=cfg.heads,
        aggregator=cfg.aggregator,
        residual=cfg.residual,
        batchnorm=cfg.batchnorm,
        bias=cfg.bias,
        ssfg=cfg.ssfg,
        dropout=cfg.dropout,
        ssfg_placement=cfg.ssfg_placement,
    )


def train_one_seed(cfg: ExperimentConfig, ds: DatasetFile, graphs: List[Graph],
                   seed: int) -> RunResult:
    task = ds.task
    out_dim = _output_dim(ds)
    weights = _train_class_weights(ds, graphs, out_dim)
    hub = RngHub(seed)
    model = GraphModel(_model_config(cfg, ds, out_dim), hub)
    params = model.parameters()
    adam_state = adam_init(params)
    sched = PlateauState(cfg.lr_init, cfg.lr_reduce_factor, cfg.patience, cfg.lr_min)

    train_ids = list(ds.splits["train"])
    val_ids = list(ds.splits["val"])
    test_ids = list(ds.splits["test"])
    diag_graph = graphs[val_ids[0]] if val_ids else graphs[train_ids[0]]

    best_val = math.inf
    best_epoch = 0
    best_snap = model.snapshot()
    records: List[MetricsRecord] = []

    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        lr_epoch = sched.lr
        order = hub.stream("shuffle", epoch).permutation(len(train_ids))
        shuffled = [train_ids[i] for i in order]
        if task == "node-class":
            batches = [[i] for i in shuffled]
        else:
            batches = [shuffled[a:a + cfg.batch_size]
                       for a in range(0, len(shuffled), cfg.batch_size)]
        loss_sum = 0.0
        weight_sum = 0.0
        preds_acc = []
        targets_acc = []
        for batch in batches:
            g = graphs[batch[0]] if len(batch) == 1 else batch_graphs([graphs[i] for i in batch])
            model.zero_grad()
            pred = model.forward(g, "train")
            targets = _targets(task, graphs, batch)
            ls = loss(task, pred, targets, weights)
            backward(ls)
            adam_step(params, [p.grad for p in params], adam_state, lr_epoch,
                      cfg.adam_betas, cfg.adam_eps)
            w = len(targets)
            loss_sum += float(ls.data) * w
            weight_sum += w
            preds_acc.append(pred.data)
            targets_acc.append(np.asarray(targets))
        train_loss = loss_sum / weight_sum
        train_metric = _metric_of(task, np.concatenate(preds_acc, axis=0),
                                  np.concatenate(targets_acc), out_dim)
        train_secs = time.perf_counter() - t0

        t1 = time.perf_counter()
        val_loss, val_metric = evaluate(model, graphs, task, val_ids, out_dim,
                                        weights, cfg.batch_size)
        smooth = None
        if epoch % cfg.diag_every == 0:
            model.forward(diag_graph, "eval", collect_hidden=True)
            smooth = [r.to_dict() for r in smoothness_report(model.last_hidden, diag_graph)]
        val_secs = time.perf_counter() - t1

        records.append(MetricsRecord(epoch, "train", train_loss, train_metric,
                                     lr_epoch, train_secs))
        records.append(MetricsRecord(epoch, "val", val_loss, val_metric,
                                     lr_epoch, val_secs, smooth))
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_snap = model.snapshot()
        _, stop = plateau_update(sched, val_loss)
        if stop:
            break

    diag_ids = test_ids or train_ids
    final_diversity = test_feature_diversity(model, [graphs[i] for i in diag_ids])
    model.restore(best_snap)
    split_loss: Dict[str, float] = {}
    split_metric: Dict[str, float] = {}
    for name, idxs in (("train", train_ids), ("val", val_ids), ("test", test_ids)):
        if idxs:
            split_loss[name], split_metric[name] = evaluate(
                model, graphs, task, idxs, out_dim, weights, cfg.batch_size)
    diversity = test_feature_diversity(model, [graphs[i] for i in diag_ids])
    return RunResult(seed, records, best_epoch, best_val,
                     split_loss, split_metric, diversity, final_diversity,
                     best_snap, model)


def test_feature_diversity(model: GraphModel, graphs: List[Graph]) -> float:
    """Mean over graphs of the last layer's pairwise feature spread."""
    values = []
    for g in graphs:
        model.forward(g, "eval", collect_hidden=True)
        values.append(mean_pairwise_distance(model.last_hidden[-1]))
    return float(np.mean(values))


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[str] = None) -> ExperimentResult:
    """Train once per seed and summarize mean +- sd per split."""
    ds = load_dataset(cfg.dataset)
    graphs = [prepare_graph(to_graph(rec), cfg.architecture) for rec in ds.graphs]
    runs = [train_one_seed(cfg, ds, graphs, seed) for seed in cfg.seeds]
    summary: Dict = {"seeds": list(cfg.seeds), "splits": {}}
    for split in ("train", "val", "test"):
        metrics = [r.split_metric[split] for r in runs if split in r.split_metric]
        losses = [r.split_loss[split] for r in runs if split in r.split_loss]
        if metrics:
            summary["splits"][split] = {
                "metric_mean": float(np.mean(metrics)),
                "metric_sd": float(np.std(metrics)),
                "loss_mean": float(np.mean(losses)),
                "loss_sd": float(np.std(losses)),
            }
    summary["test_diversity"] = [r.test_diversity for r in runs]
    summary["final_diversity"] = [r.final_diversity for r in runs]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for run in runs:
            path = os.path.join(out_dir, f"metrics_seed{run.seed}.jsonl")
            with open(path, "w", encoding="utf-8") as fh:
                for rec in run.records:
                    fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            save_checkpoint(os.path.join(out_dir, f"ckpt_seed{run.seed}"),
                            run.model, cfg, run.seed)
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return ExperimentResult(cfg, runs, summary)


def eval_with_scale(model: GraphModel, ds: DatasetFile, graphs: List[Graph],
                    scales: Sequence[float], split: str = "test",
                    batch_size: int = 32) -> List[Dict]:
    """Evaluate one split once per constant eval-time scale."""
    out_dim = _output_dim(ds)
    weights = _train_class_weights(ds, graphs, out_dim)
    idxs = ds.splits[split]
    rows = []
    for s in scales:
        ls, metric = evaluate(model, graphs, ds.task, idxs, out_dim, weights,
                              batch_size, test_scale=float(s))
        rows.append({"scale": float(s), "loss": ls, "metric": metric})
    return rows


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def _state_arrays(model: GraphModel) -> List[Tuple[str, str, np.ndarray]]:
    arrays = [(p.name, "param", p.data) for p in model.parameters()]
    for name, st in model.bn_states():
        arrays.append((f"{name}.running_mean", "buffer", st.running_mean))
        arrays.append((f"{name}.running_var", "buffer", st.running_var))
    return arrays


def save_checkpoint(dir_path: str, model: GraphModel, cfg: ExperimentConfig,
                    seed: int) -> None:
    """Write manifest.json (config, dims, seed, array table) plus params.bin
    (flat little-endian float64, in manifest order)."""
    os.makedirs(dir_path, exist_ok=True)
    arrays = _state_arrays(model)
    manifest = {
        "config": config_to_dict(cfg),
        "model": {
            "task": model.cfg.task,
            "in_dim": model.cfg.in_dim,
            "out_dim": model.cfg.out_dim,
            "edge_in_dim": model.cfg.edge_in_dim,
        },
        "seed": seed,
        "format": "float64-le",
        "arrays": [{"name": n, "kind": k, "shape": list(a.shape)} for n, k, a in arrays],
    }
    with open(os.path.join(dir_path, "manifest.json"), "w", encoding="utf-8") as fh:
        fh.write(canonical_json(manifest))
    with open(os.path.join(dir_path, "params.bin"), "wb") as fh:
        for _, _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(dir_path: str) -> Tuple[GraphModel, ExperimentConfig, int]:
    """Rebuild the model from a checkpoint directory."""
    with open(os.path.join(dir_path, "manifest.json"), "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    cfg = config_from_dict(manifest["config"])
    dims = manifest["model"]
    mc = ModelConfig(
        task=dims["task"],
        architecture=cfg.architecture,
        in_dim=int(dims["in_dim"]),
        hidden_dim=cfg.hidden_dim,
        out_dim=int(dims["out_dim"]),
        layers=cfg.layers,
        heads=cfg.heads,
        aggregator=cfg.aggregator,
        residual=cfg.residual,
        batchnorm=cfg.batchnorm,
        bias=cfg.bias,
        ssfg=cfg.ssfg,
        dropout=cfg.dropout,
        ssfg_placement=cfg.ssfg_placement,
        edge_in_dim=int(dims.get("edge_in_dim", 1)),
    )
    seed = int(manifest["seed"])
    model = GraphModel(mc, RngHub(seed))
    arrays = _state_arrays(model)
    entries = manifest["arrays"]
    if len(entries) != len(arrays):
        raise DataFormatError(
            f"checkpoint lists {len(entries)} arrays, model has {len(arrays)}")
    with open(os.path.join(dir_path, "params.bin"), "rb") as fh:
        blob = fh.read()
    offset = 0
    for (name, kind, arr), entry in zip(arrays, entries):
        if entry["name"] != name or entry["kind"] != kind:
            raise DataFormatError(
                f"checkpoint array {entry['name']!r} does not match model array {name!r}")
        shape = tuple(entry["shape"])
        if shape != arr.shape:
            raise DataFormatError(
                f"array {name!r}: checkpoint shape {shape} != model shape {arr.shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise DataFormatError("params.bin is truncated")
        arr[...] = np.frombuffer(blob[offset:offset + nbytes], dtype="<f8").reshape(shape)
        offset += nbytes
    if offset != len(blob):
        raise DataFormatError("params.bin has trailing bytes")
    return model, cfg, seed
