import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsnoop.benchmarks import generate_benchmark
from qsnoop.encoder import Dataset, EncodingError, build_dataset, encode_graph, stratified_split
from qsnoop.fixtures import two_local_timed_fixture
from qsnoop.traces import CnotTrace, oracle_trace
from qsnoop.transpiler import build_coupling_map, transpile

from .strategies import random_native_circuit

LINE5 = build_coupling_map("line(5)")


def _trace(seed, label=None, n_gates=30):
    c = random_native_circuit(np.random.default_rng(seed), 5, n_gates)
    return oracle_trace(transpile(c, LINE5, "trivial", "sabre", "O3lite", "alap", seed), 180, label)


def _brute_force_cx_pairs(c):
    pairs = {}
    for g in c.gates:
        if g.kind == "cx":
            k = tuple(sorted(g.qubits))
            pairs[k] = pairs.get(k, 0) + 1
    return pairs


def test_ghz4_graph():
    c = generate_benchmark("ghz", 4)
    s = transpile(c, build_coupling_map("line(4)"), "trivial", "sabre", "O0", "alap", 0)
    g = encode_graph(oracle_trace(s, 180))
    expected = _brute_force_cx_pairs(c)
    assert expected == {(0, 1): 1, (1, 2): 1, (2, 3): 1}
    assert dict(zip(g.edges, g.weights)) == expected
    assert g.node_features[:, 0].tolist() == [1, 1, 1, 1]
    assert g.node_features[:, 1].tolist() == [1, 2, 2, 1]


def test_idle_qubit_row_is_zero():
    g = encode_graph(oracle_trace(two_local_timed_fixture(), 2000), resolution=2000 / 180)
    assert not g.node_features[0].any()
    assert g.node_features[1:, 0].tolist() == [1, 1, 1, 1]


def test_feature_width():
    g = encode_graph(_trace(1), b_max=8)
    assert g.node_features.shape == (5, 11)
    assert g.b_max == 8


@given(st.integers(0, 5000), st.sampled_from([1.0, 2.0, 3.5, 15.0]))
def test_totals_match_edge_incidence(seed, res):
    g = encode_graph(_trace(seed), res)
    inc = np.zeros(g.n_nodes)
    for (x, y), w in zip(g.edges, g.weights):
        inc[x] += w
        inc[y] += w
    assert np.array_equal(g.node_features[:, 2], inc)
    assert np.array_equal(g.node_features[:, 3:].sum(axis=1), inc)
    assert np.array_equal(g.node_features[:, 0], (inc > 0).astype(float))


def test_overflow_folds_into_last_slot():
    t = _trace(4, n_gates=60)
    full = encode_graph(t)
    short = encode_graph(t, b_max=3)
    assert full.b_max > 3
    assert np.array_equal(short.node_features[:, 3:5], full.node_features[:, 3:5])
    assert np.array_equal(short.node_features[:, 5], full.node_features[:, 5:].sum(axis=1))


@given(st.integers(0, 5000), st.permutations(range(5)))
def test_permutation_consistency(seed, perm):
    t = _trace(seed)
    relabeled = CnotTrace(t.n_qubits, t.bucket_duration, t.n_buckets,
                          {(b, (perm[x], perm[y])): v for (b, (x, y)), v in t.counts.items()},
                          t.edges, t.cx_duration, t.label)
    g = encode_graph(t)
    h = encode_graph(relabeled)
    gp = g.permuted(perm)
    assert np.array_equal(gp.node_features, h.node_features)
    assert dict(zip((tuple(sorted(e)) for e in gp.edges), gp.weights)) == dict(zip(h.edges, h.weights))


def test_reencoding_is_bit_identical():
    t = _trace(9)
    a, b = encode_graph(t, 2.0), encode_graph(t, 2.0)
    assert a.node_features.tobytes() == b.node_features.tobytes()
    assert a.edges == b.edges and a.weights == b.weights


def test_resolution_below_one_rejected():
    with pytest.raises(EncodingError):
        encode_graph(_trace(0), 0.5)


def test_split_sizes_and_stratification():
    labels = np.repeat(np.arange(10), 16)
    tr, te = stratified_split(labels, 0.8, 0)
    assert (len(tr), len(te)) == (128, 32)
    assert set(labels[te]) == set(range(10)) and set(labels[tr]) == set(range(10))
    assert not set(tr) & set(te)
    tr2, te2 = stratified_split(labels, 0.8, 0)
    assert np.array_equal(te, te2)
    assert not np.array_equal(te, stratified_split(labels, 0.8, 1)[1])


@given(st.lists(st.integers(2, 9), min_size=2, max_size=6), st.floats(0.3, 0.9), st.integers(0, 100))
def test_split_every_class_both_sides(sizes, frac, seed):
    labels = np.concatenate([np.full(n, i) for i, n in enumerate(sizes)])
    tr, te = stratified_split(labels, frac, seed)
    assert len(tr) + len(te) == len(labels)
    for c in range(len(sizes)):
        assert (labels[tr] == c).any() and (labels[te] == c).any()


def test_dataset_build_and_errors():
    traces = [_trace(i, label=f"c{i % 3}") for i in range(12)]
    d = build_dataset(traces, 1.0, 0.75, 0)
    assert d.n_classes == 3 and d.b_max == max(t.n_buckets for t in traces)
    assert all(g.n_features == 3 + d.b_max for g in d.graphs)
    with pytest.raises(EncodingError):
        build_dataset(traces[:4], 1.0, 0.75, 0)  # c1 and c2 have one instance each
    with pytest.raises(EncodingError):
        build_dataset([_trace(0, "a"), _trace(1, "a")], 1.0)
    with pytest.raises(EncodingError):
        build_dataset([_trace(0)], 1.0)


def test_dataset_roundtrip(tmp_path):
    traces = [_trace(i, label=f"c{i % 2}") for i in range(6)]
    d = build_dataset(traces, 2.0, 0.5, 3)
    d.save(tmp_path / "ds")
    e = Dataset.load(tmp_path / "ds")
    assert e.class_names == d.class_names and e.b_max == d.b_max and e.resolution == d.resolution
    assert np.array_equal(e.train_idx, d.train_idx) and np.array_equal(e.test_idx, d.test_idx)
    for g, h in zip(d.graphs, e.graphs):
        assert np.array_equal(g.node_features, h.node_features)
        assert g.edges == h.edges and g.weights == h.weights and g.label == h.label
