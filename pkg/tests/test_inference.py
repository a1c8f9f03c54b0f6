import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsnoop.inference import (
    CalibrationTable, InferenceError, _solve, calibrate, estimate_trace, hash_seed, largest_remainder,
)
from qsnoop.sidechannel import (
    CgdConfig, ZeroCountTrace, default_model, partition_tenants, probe_schedule, simulate_cgd,
)
from qsnoop.transpiler import build_coupling_map

LAGOS = build_coupling_map("lagos7")
WINDOW = 900


@pytest.fixture(scope="module")
def single_edge():
    part = partition_tenants(LAGOS, {0, 1})
    model = default_model(part).noiseless()
    cal = calibrate(part, model, CgdConfig(window=WINDOW), max_k=5)
    return part, model, cal


@pytest.fixture(scope="module")
def shared_snoops():
    part = partition_tenants(LAGOS, {0, 1, 2})
    model = default_model(part).noiseless()
    cal = calibrate(part, model, CgdConfig(window=WINDOW, repetitions=10), max_k=5)
    return part, model, cal


def test_calibration_rows(single_edge):
    part, _, cal = single_edge
    assert cal.snoops == (2, 3, 4, 5, 6)
    assert cal.edges == ((0, 1),)
    assert (cal.zero_deviation >= 0).all() and (cal.baseline <= cal.shots).all()
    row = dict(zip(cal.snoops, cal.slope[:, 0]))
    assert row[5] > 0.1                        # graded, next to the edge
    assert row[2] == 0.0 and row[6] == 0.0     # insensitive
    assert cal.usable.tolist() == [False, False, True, True, False]  # binary snoop 3 saturates
    # k = 0 probes reproduce the baseline
    for s in cal.snoops:
        assert cal.curves[(s, (0, 1))][0] == pytest.approx(cal.baseline[cal.snoops.index(s)])


@pytest.mark.parametrize("k", range(6))
def test_single_edge_exact_recovery(single_edge, k):
    part, model, cal = single_edge
    s = probe_schedule(part, [(0, 1)] * k, total=WINDOW)
    obs = simulate_cgd(s, part, model, CgdConfig(window=WINDOW, seed=100 + k), n_buckets=1)
    t = estimate_trace(obs, cal, part)
    assert t.provenance == "inferred" and t.flags == ()
    assert t.counts == ({(0, (0, 1)): k} if k else {})


def test_zero_deviation_gives_empty_trace(single_edge):
    part, _, cal = single_edge
    zeros = np.broadcast_to(np.rint(cal.baseline)[None, :, None], (3, len(cal.snoops), 4)).astype(int)
    obs = ZeroCountTrace(cal.snoops, zeros, zeros[:, 0], cal.shots, WINDOW)
    assert estimate_trace(obs, cal, part).counts == {}


def test_shared_snoops_least_norm_split(shared_snoops):
    part, model, cal = shared_snoops
    s = probe_schedule(part, [(0, 1)] * 4, total=WINDOW)
    obs = simulate_cgd(s, part, model, CgdConfig(window=WINDOW, repetitions=10), n_buckets=1)
    t = estimate_trace(obs, cal, part)
    assert "ill_posed" in t.flags
    assert t.counts == {(0, (0, 1)): 2, (0, (1, 2)): 2}


def test_least_norm_on_one_by_two():
    x, ill = _solve(np.array([[1.0, 1.0]]), np.array([3.0]))
    assert ill
    assert x == pytest.approx([1.5, 1.5])
    x, ill = _solve(np.eye(2), np.array([2.0, -1.0]))
    assert not ill and x == pytest.approx([2.0, 0.0])


def test_degraded_fallback(single_edge):
    part, model, cal = single_edge
    blind = CalibrationTable(cal.snoops, cal.edges, cal.baseline, cal.zero_deviation, cal.slope,
                             np.zeros_like(cal.r2), cal.shots, cal.eps_excite, cal.eps_relax, cal.window, cal.max_k)
    s = probe_schedule(part, [(0, 1)] * 2, total=WINDOW)
    obs = simulate_cgd(s, part, model, CgdConfig(window=WINDOW), n_buckets=1)
    t = estimate_trace(obs, blind, part)
    assert t.flags == ("degraded",)


def test_calibration_errors(single_edge):
    part, model, cal = single_edge
    with pytest.raises(InferenceError):
        calibrate(part, model, CgdConfig(window=WINDOW), max_k=0)
    with pytest.raises(InferenceError):
        calibrate(part, model, CgdConfig(window=360), max_k=3)
    obs = simulate_cgd(probe_schedule(part, [], total=360), part, model,
                       CgdConfig(shots_per_bucket=10, window=360, repetitions=1))
    with pytest.raises(InferenceError):
        estimate_trace(obs, cal, part)


@given(st.lists(st.floats(0, 20, allow_nan=False), min_size=1, max_size=8))
def test_largest_remainder_properties(xs):
    x = np.array(xs)
    r = largest_remainder(x)
    assert (r >= 0).all()
    assert r.sum() == int(np.rint(x.sum()))
    assert (np.abs(r - x) < 1 + 1e-9).all()


def test_largest_remainder_examples():
    assert largest_remainder(np.array([1.5, 1.5])).tolist() == [2, 1]
    assert largest_remainder(np.array([0.4, 0.4, 0.4])).tolist() == [1, 0, 0]
    assert largest_remainder(np.array([2.0, 3.0])).tolist() == [2, 3]


def test_hash_seed_is_stable_and_spread():
    assert hash_seed(1, 2, 3) == hash_seed(1, 2, 3)
    assert len({hash_seed(0, j, k) for j in range(5) for k in range(6)}) == 30
