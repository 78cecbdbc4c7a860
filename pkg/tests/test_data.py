"""Dataset generation, canonical serialization, and validation errors."""

import json

import numpy as np
import pytest

from ssfgnet.data import (
    DatasetFile,
    GraphRecord,
    RegressionSpec,
    SbmGraphSpec,
    SbmSpec,
    canonical_json,
    gen_regression_task,
    gen_sbm_graph_task,
    gen_sbm_node_task,
    load_dataset,
    regression_oracle,
    save_dataset,
    to_graph,
)
from ssfgnet.errors import ConfigError, DataFormatError
from ssfgnet.graph import connected_components

SMALL_NODE = SbmSpec(num_graphs=16, nodes_min=12, nodes_max=16, communities=3,
                     p_intra=0.6, q_inter=0.05, seed=7)
SMALL_GRAPH = SbmGraphSpec(num_graphs=16, nodes_min=12, nodes_max=16, seed=7)
SMALL_REG = RegressionSpec(num_graphs=16, nodes_min=8, nodes_max=12, seed=7)


# ---------------------------------------------------------------------------
# canonical JSON
# ---------------------------------------------------------------------------


def test_canonical_json_sorted_compact():
    s = canonical_json({"b": 1, "a": [True, None, "x"]})
    assert s == '{"a":[true,null,"x"],"b":1}'


def test_canonical_json_float_round_trip():
    vals = [0.1, 1.0 / 3.0, 1e-300, 123456.789, np.float64(2.5)]
    s = canonical_json({"v": vals})
    back = json.loads(s)["v"]
    assert all(a == float(b) for a, b in zip(back, vals))


def test_canonical_json_negative_zero_normalized():
    assert canonical_json([-0.0, 0.0]) == "[0,0]"


def test_canonical_json_rejects_bad_values():
    with pytest.raises(DataFormatError, match="non-finite"):
        canonical_json({"v": float("nan")})
    with pytest.raises(DataFormatError, match="non-finite"):
        canonical_json(float("inf"))
    with pytest.raises(DataFormatError, match="keys must be strings"):
        canonical_json({1: "x"})
    with pytest.raises(DataFormatError, match="cannot serialize"):
        canonical_json({"v": object()})


def test_canonical_json_numpy_arrays():
    assert canonical_json(np.array([[1.5, 2.0]])) == "[[1.5,2]]"


# ---------------------------------------------------------------------------
# generation determinism and structure
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("gen,spec", [
    (gen_sbm_node_task, SMALL_NODE),
    (gen_sbm_graph_task, SMALL_GRAPH),
    (gen_regression_task, SMALL_REG),
])
def test_generation_deterministic(gen, spec, tmp_path):
    a, b = gen(spec), gen(spec)
    pa, pb = tmp_path / "a.json", tmp_path / "b.json"
    save_dataset(a, pa)
    save_dataset(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


@pytest.mark.parametrize("gen,spec", [
    (gen_sbm_node_task, SMALL_NODE),
    (gen_sbm_graph_task, SMALL_GRAPH),
    (gen_regression_task, SMALL_REG),
])
def test_generated_graphs_connected(gen, spec):
    d = gen(spec)
    assert len(d.graphs) == spec.num_graphs
    for rec in d.graphs:
        g = to_graph(rec)
        assert len(connected_components(g.n, g.src, g.dst)) == 1
        assert rec.x.shape == (rec.n, d.feature_dim)


def test_splits_partition_and_sizes():
    d = gen_sbm_node_task(SMALL_NODE)
    tr, va, te = (d.splits[k] for k in ("train", "val", "test"))
    assert len(tr) == 12 and len(va) == 2 and len(te) == 2
    assert sorted(tr + va + te) == list(range(16))


def test_separable_case_features_reveal_labels():
    spec = SbmSpec(num_graphs=4, nodes_min=9, nodes_max=12, communities=3,
                   p_intra=1.0, q_inter=0.0, labeled_fraction=1.0, seed=3)
    d = gen_sbm_node_task(spec)
    for rec in d.graphs:
        assert np.array_equal(np.argmax(rec.x, axis=1), np.asarray(rec.y))
        assert (rec.x.sum(axis=1) == 1).all()


def test_zero_labeled_fraction_gives_zero_features():
    spec = SbmSpec(num_graphs=2, nodes_min=12, nodes_max=12, communities=3,
                   p_intra=0.9, q_inter=0.1, labeled_fraction=0.0, seed=4)
    d = gen_sbm_node_task(spec)
    for rec in d.graphs:
        assert not rec.x.any()


def test_connectivity_repair_adds_exactly_bridges():
    # p=1, q=0: each community is a clique, so exactly K-1 bridges are added
    spec = SbmSpec(num_graphs=3, nodes_min=12, nodes_max=12, communities=4,
                   p_intra=1.0, q_inter=0.0, seed=5)
    d = gen_sbm_node_task(spec)
    for rec in d.graphs:
        labels = np.asarray(rec.y)
        intra = sum(int(m * (m - 1) // 2) for m in np.bincount(labels))
        assert len(rec.edges) == intra + (4 - 1)


def test_graph_task_labels_alternate_and_buckets_one_hot():
    d = gen_sbm_graph_task(SMALL_GRAPH)
    assert [rec.y for rec in d.graphs] == [i % 2 for i in range(16)]
    for rec in d.graphs:
        assert ((rec.x == 0) | (rec.x == 1)).all()
        assert (rec.x.sum(axis=1) == 1).all()


def test_regime_discrimination_learnable_from_degree():
    # structural sanity: a linear probe on (mean degree, density) separates
    # the two regimes almost perfectly
    from sklearn.linear_model import LogisticRegression

    d = gen_sbm_graph_task(SbmGraphSpec(num_graphs=80, seed=11))
    feats, labels = [], []
    for rec in d.graphs:
        g = to_graph(rec)
        deg = g.in_degrees()
        feats.append([deg.mean(), len(rec.edges) / (rec.n * (rec.n - 1) / 2)])
        labels.append(rec.y)
    feats = np.asarray(feats)
    feats = (feats - feats.mean(axis=0)) / feats.std(axis=0)
    clf = LogisticRegression().fit(feats, labels)
    assert clf.score(feats, labels) > 0.95


def test_null_regimes_are_indistinguishable():
    from sklearn.linear_model import LogisticRegression
    from sklearn.model_selection import cross_val_score

    spec = SbmGraphSpec(num_graphs=80, p_intra_a=0.4, q_inter_a=0.4,
                        p_intra_b=0.4, q_inter_b=0.4, seed=12)
    d = gen_sbm_graph_task(spec)
    feats = []
    for rec in d.graphs:
        deg = to_graph(rec).in_degrees()
        feats.append([deg.mean(), deg.std(), len(rec.edges) / rec.n])
    labels = [rec.y for rec in d.graphs]
    acc = cross_val_score(LogisticRegression(), feats, labels, cv=4).mean()
    assert 0.3 < acc < 0.7


# ---------------------------------------------------------------------------
# regression rule
# ---------------------------------------------------------------------------


def test_regression_oracle_exact_without_noise():
    spec = RegressionSpec(num_graphs=10, nodes_min=8, nodes_max=12,
                          noise_sd=0.0, seed=6)
    d = gen_regression_task(spec)
    preds = regression_oracle(d)
    ys = np.array([rec.y for rec in d.graphs])
    assert np.array_equal(preds, ys)


def test_regression_noise_magnitude():
    spec = RegressionSpec(num_graphs=400, nodes_min=8, nodes_max=12,
                          noise_sd=0.02, seed=8)
    d = gen_regression_task(spec)
    resid = np.array([rec.y for rec in d.graphs]) - regression_oracle(d)
    expected_mae = 0.02 * np.sqrt(2.0 / np.pi)
    assert abs(np.abs(resid).mean() - expected_mae) < 0.003
    assert abs(resid.mean()) < 0.003


def test_regression_rule_arithmetic():
    # one reactive edge among ten nodes -> y = 0.1
    rec = GraphRecord(10, [(0, 1), (2, 3), (4, 5)],
                      np.eye(10)[:, :5].copy(), 0.0)
    rec.x[:] = 0
    types = [0, 1, 2, 2, 4, 4, 0, 0, 0, 0]
    for i, t in enumerate(types):
        rec.x[i, t] = 1.0
    d = DatasetFile("graph-regress", 5, [rec],
                    {"train": [0], "val": [], "test": []},
                    {"reactive_pairs": [[0, 1]], "target_rule": "reactive-pairs"})
    assert regression_oracle(d)[0] == pytest.approx(0.1)


def test_regression_empty_rule_targets_zero():
    spec = RegressionSpec(num_graphs=4, nodes_min=8, nodes_max=10,
                          reactive_pairs=(), noise_sd=0.0, seed=9)
    d = gen_regression_task(spec)
    assert all(rec.y == 0.0 for rec in d.graphs)


def test_oracle_requires_rule_meta():
    d = gen_sbm_node_task(SMALL_NODE)
    with pytest.raises(ConfigError):
        regression_oracle(d)


# ---------------------------------------------------------------------------
# file round trips and validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("gen,spec", [
    (gen_sbm_node_task, SMALL_NODE),
    (gen_sbm_graph_task, SMALL_GRAPH),
    (gen_regression_task, SMALL_REG),
])
def test_save_load_save_byte_identical(gen, spec, tmp_path):
    p1, p2 = tmp_path / "one.json", tmp_path / "two.json"
    save_dataset(gen(spec), p1)
    save_dataset(load_dataset(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_to_graph_mirrors_pairs_once():
    rec = GraphRecord(3, [(0, 1), (1, 1)], np.zeros((3, 2)), [0, 0, 0])
    g = to_graph(rec)
    # the 0-1 pair becomes two directed edges; the loop stays single
    assert g.num_edges == 3
    assert sorted(zip(g.src.tolist(), g.dst.tolist())) == [(0, 1), (1, 0), (1, 1)]


def valid_payload():
    return {
        "task": "node-class",
        "feature_dim": 2,
        "graphs": [
            {"n": 3, "edges": [[0, 1], [1, 2]],
             "x": [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
             "y": [0, 1, 0]},
        ],
        "splits": {"train": [0], "val": [], "test": []},
    }


def write_payload(tmp_path, payload, name="d.json"):
    p = tmp_path / name
    p.write_text(canonical_json(payload))
    return p


def test_load_valid_minimal(tmp_path):
    d = load_dataset(write_payload(tmp_path, valid_payload()))
    assert d.task == "node-class" and len(d.graphs) == 1
    assert np.array_equal(d.graphs[0].y, [0, 1, 0])


def test_load_rejects_truncated_file(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(canonical_json(valid_payload())[:-20])
    with pytest.raises(DataFormatError, match="parse error"):
        load_dataset(p)


def test_load_rejects_bad_edge_with_position(tmp_path):
    payload = valid_payload()
    payload["graphs"][0]["edges"][1] = [1, 9]
    with pytest.raises(DataFormatError, match=r"graph 0, edge 1: index 9 outside \[0, 3\)"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_wrong_feature_row(tmp_path):
    payload = valid_payload()
    payload["graphs"][0]["x"][1] = [0.0]
    with pytest.raises(DataFormatError, match="graph 0, row 1"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_nonfinite_feature(tmp_path):
    payload = valid_payload()
    p = write_payload(tmp_path, payload)
    text = p.read_text().replace('"x":[[1,0]', '"x":[[NaN,0]')
    p.write_text(text)
    with pytest.raises(DataFormatError, match="graph 0, row 0"):
        load_dataset(p)


def test_load_rejects_split_overlap(tmp_path):
    payload = valid_payload()
    payload["graphs"].append(dict(payload["graphs"][0]))
    payload["splits"] = {"train": [0, 1], "val": [1], "test": []}
    with pytest.raises(DataFormatError, match="index 1 appears twice"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_uncovered_graph(tmp_path):
    payload = valid_payload()
    payload["graphs"].append(dict(payload["graphs"][0]))
    with pytest.raises(DataFormatError, match="cover every graph"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_split_index_range(tmp_path):
    payload = valid_payload()
    payload["splits"]["test"] = [5]
    with pytest.raises(DataFormatError, match=r"split 'test': index 5 outside"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_unknown_task_and_missing_keys(tmp_path):
    payload = valid_payload()
    payload["task"] = "edge-class"
    with pytest.raises(DataFormatError, match="unknown task"):
        load_dataset(write_payload(tmp_path, payload))
    payload = valid_payload()
    del payload["splits"]
    with pytest.raises(DataFormatError, match="missing top-level key 'splits'"):
        load_dataset(write_payload(tmp_path, payload))


def test_load_rejects_task_mismatched_labels(tmp_path):
    payload = valid_payload()
    payload["graphs"][0]["y"] = 1  # scalar label on a node task
    with pytest.raises(DataFormatError, match="graph 0: y must list 3 node labels"):
        load_dataset(write_payload(tmp_path, payload))
    payload = valid_payload()
    payload["task"] = "graph-regress"
    payload["graphs"][0]["y"] = [0.5]
    with pytest.raises(DataFormatError, match="finite number"):
        load_dataset(write_payload(tmp_path, payload))


def test_spec_validation():
    with pytest.raises(ConfigError):
        SbmSpec(p_intra=0.2, q_inter=0.5)
    with pytest.raises(ConfigError):
        SbmSpec(communities=1)
    with pytest.raises(ConfigError):
        SbmGraphSpec(degree_buckets=1)
    with pytest.raises(ConfigError):
        RegressionSpec(reactive_pairs=((0, 9),))
    with pytest.raises(ConfigError):
        RegressionSpec(noise_sd=-1.0)
    with pytest.raises(ConfigError):
        SbmSpec(train_frac=0.9, val_frac=0.2)
