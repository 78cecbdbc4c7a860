"""Command-line interface.

Subcommands: ``train`` (config-driven experiment, JSON-lines metrics),
``gen-data`` (synthetic dataset generation), ``sweep-test-scale``
(eval-time constant-scale sweep on a checkpoint), and ``diagnose``
(smoothing-ladder diagnostics on a dataset graph).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .data import (
    RegressionSpec,
    SbmGraphSpec,
    SbmSpec,
    gen_regression_task,
    gen_sbm_graph_task,
    gen_sbm_node_task,
    load_dataset,
    save_dataset,
    to_graph,
)
from .diagnostics import (
    distance_to_stationary,
    mad,
    mean_pairwise_distance,
    power_smooth,
    stationary_pi,
)
from .errors import ConfigError
from .graph import add_self_loops
from .harness import (
    apply_overrides,
    config_from_dict,
    eval_with_scale,
    load_checkpoint,
    run_experiment,
)
from .model import prepare_graph

_GENERATORS = {
    "node-class": (SbmSpec, gen_sbm_node_task),
    "graph-class": (SbmGraphSpec, gen_sbm_graph_task),
    "graph-regress": (RegressionSpec, gen_regression_task),
}


def _cmd_train(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    raw = apply_overrides(raw, args.override)
    cfg = config_from_dict(raw)
    result = run_experiment(cfg, out_dir=args.out)
    print(json.dumps(result.summary, sort_keys=True))
    return 0


def _cmd_gen_data(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if "task" not in raw:
        raise ConfigError("spec file must set 'task'")
    task = raw.pop("task")
    if task not in _GENERATORS:
        raise ConfigError(f"unknown task {task!r}; choose from {sorted(_GENERATORS)}")
    spec_cls, generator = _GENERATORS[task]
    if "reactive_pairs" in raw:
        raw["reactive_pairs"] = tuple(tuple(p) for p in raw["reactive_pairs"])
    spec = spec_cls(**raw)
    ds = generator(spec)
    save_dataset(ds, args.out)
    print(json.dumps({"task": ds.task, "graphs": len(ds.graphs),
                      "feature_dim": ds.feature_dim, "out": args.out},
                     sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    model, cfg, _ = load_checkpoint(args.model)
    ds = load_dataset(args.data)
    graphs = [prepare_graph(to_graph(rec), cfg.architecture) for rec in ds.graphs]
    scales = [float(s) for s in args.scales.split(",") if s]
    rows = eval_with_scale(model, ds, graphs, scales, split=args.split,
                           batch_size=cfg.batch_size)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def _cmd_diagnose(args) -> int:
    ds = load_dataset(args.data)
    g = add_self_loops(to_graph(ds.graphs[args.graph]))
    pi = stationary_pi(g)
    ks = [int(k) for k in args.k.split(",") if k]
    for k in ks:
        h = power_smooth(g, g.x, k)
        row = {
            "k": k,
            "mean_pairwise_distance": mean_pairwise_distance(h),
            "distance_to_stationary": distance_to_stationary(h, pi),
        }
        try:
            row["mad"] = mad(h, g)
        except ValueError:
            row["mad"] = None
        print(json.dumps(row, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssfgnet",
                                description="Graph-network training with "
                                            "stochastic feature/gradient scaling")
    sub = p.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="run a config-driven experiment")
    t.add_argument("--config", required=True, help="JSON experiment config")
    t.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (dotted keys, repeatable)")
    t.add_argument("--out", default=None, help="directory for metrics and checkpoints")
    t.set_defaults(fn=_cmd_train)

    g = sub.add_parser("gen-data", help="generate a synthetic dataset")
    g.add_argument("--spec", required=True, help="JSON generator spec with a 'task' field")
    g.add_argument("--out", required=True, help="output dataset path")
    g.set_defaults(fn=_cmd_gen_data)

    s = sub.add_parser("sweep-test-scale", help="evaluate a checkpoint at several "
                                                "constant eval-time scales")
    s.add_argument("--model", required=True, help="checkpoint directory")
    s.add_argument("--data", required=True, help="dataset path")
    s.add_argument("--scales", default="0.8,0.9,1.0,1.1,1.2")
    s.add_argument("--split", default="test", choices=("train", "val", "test"))
    s.set_defaults(fn=_cmd_sweep)

    d = sub.add_parser("diagnose", help="smoothing-ladder diagnostics on one graph")
    d.add_argument("--data", required=True, help="dataset path")
    d.add_argument("--k", default="0,1,2,4,8,16", help="comma-separated step counts")
    d.add_argument("--graph", type=int, default=0, help="graph index to inspect")
    d.set_defaults(fn=_cmd_diagnose)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
