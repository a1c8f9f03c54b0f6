import pytest

from qsnoop.benchmarks import FAMILIES, MIN_QUBITS, generate_benchmark
from qsnoop.circuit import NATIVE, CircuitError, circuit_stats
from qsnoop.oracle import unitary_equivalent

# CX totals of the native-gate 120-qubit suite (published CNOT-count table)
PUBLISHED_CX = [("ghz", 120, 119), ("ghz", 64, 63), ("dj", 120, 119), ("graphstate", 120, 120),
                ("qft", 120, 14460), ("qpe", 120, 14457)]


@pytest.mark.parametrize("family,n,cx", PUBLISHED_CX)
def test_published_cx_totals(family, n, cx):
    assert generate_benchmark(family, n).count("cx") == cx


def test_qft_average_per_pair():
    # the table lists 2.03 for qft at 120 qubits
    assert circuit_stats(generate_benchmark("qft", 120)).avg_cnot_per_pair == pytest.approx(2.03, abs=0.01)


def test_ghz_uses_each_pair_once():
    assert circuit_stats(generate_benchmark("ghz", 30)).avg_cnot_per_pair == 1.0


@pytest.mark.parametrize("family", FAMILIES)
def test_native_and_deterministic(family):
    a = generate_benchmark(family, 5, seed=3)
    b = generate_benchmark(family, 5, seed=3)
    assert a == b
    assert {g.kind for g in a.gates} <= NATIVE
    assert a.family == family


@pytest.mark.parametrize("family", FAMILIES)
def test_native_lowering_matches_logical(family):
    n = max(MIN_QUBITS[family], 4)
    logical = generate_benchmark(family, n, seed=1, native=False)
    native = generate_benchmark(family, n, seed=1)
    assert unitary_equivalent(logical.without_measurements(), native.without_measurements())


@pytest.mark.parametrize("family", FAMILIES)
def test_too_few_qubits(family):
    with pytest.raises(CircuitError):
        generate_benchmark(family, MIN_QUBITS[family] - 1)


def test_unknown_family():
    with pytest.raises(CircuitError):
        generate_benchmark("shor", 5)
