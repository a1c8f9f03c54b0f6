"""Seeded generators for the benchmark families used as victim circuits."""
from __future__ import annotations

import math

import numpy as np

from .circuit import CCX, CP, CX, SWAP, Circuit, CircuitError, Gate, H, RZ, SX, X, decompose_to_native, u3_native

FAMILIES = ("ghz", "dj", "graphstate", "qft", "adder", "twolocal", "qpe", "random")
MIN_QUBITS = {"ghz": 2, "dj": 2, "graphstate": 3, "qft": 2, "adder": 4, "twolocal": 2, "qpe": 2, "random": 2}


def _ghz(n, rng):
    return [H(0)] + [CX(i, i + 1) for i in range(n - 1)]


def _dj(n, rng):
    anc = n - 1
    flips = rng.random(n - 1) < 0.5
    gates = [X(anc)] + [H(q) for q in range(n)]
    gates += [X(i) for i in range(n - 1) if flips[i]]
    gates += [CX(i, anc) for i in range(n - 1)]
    gates += [X(i) for i in range(n - 1) if flips[i]]
    gates += [H(i) for i in range(n - 1)]
    return gates


def _graphstate(n, rng):
    gates = [H(q) for q in range(n)]
    for i in range(n):
        t = (i + 1) % n
        gates += [H(t), CX(i, t), H(t)]
    return gates


def _qft_gates(qubits):
    n = len(qubits)
    gates = []
    for i in range(n):
        gates.append(H(qubits[i]))
        for j in range(i + 1, n):
            gates.append(CP(math.pi / 2 ** (j - i), qubits[j], qubits[i]))
    for i in range(n // 2):
        gates.append(SWAP(qubits[i], qubits[n - 1 - i]))
    return gates


def _inverse_qft_gates(qubits):
    out = []
    for g in reversed(_qft_gates(qubits)):
        out.append(Gate(g.kind, g.qubits, -g.param) if g.kind == "cp" else g)
    return out


def _qft(n, rng):
    return _qft_gates(list(range(n)))


def _adder(n, rng):
    m = (n - 2) // 2
    cin, cout = 0, 2 * m + 1
    b = [1 + 2 * i for i in range(m)]
    a = [2 + 2 * i for i in range(m)]
    bits = rng.random(2 * m) < 0.5
    gates = [X(q) for q, on in zip(a + b, bits) if on]

    def maj(c, y, x):
        return [CX(x, y), CX(x, c), CCX(c, y, x)]

    def uma(c, y, x):
        return [CCX(c, y, x), CX(x, c), CX(c, y)]

    carry = [cin] + a[:-1]
    for i in range(m):
        gates += maj(carry[i], b[i], a[i])
    gates.append(CX(a[-1], cout))
    for i in reversed(range(m)):
        gates += uma(carry[i], b[i], a[i])
    return gates


def _twolocal(n, rng, reps=2):
    gates = []
    for r in range(reps + 1):
        for q in range(n):
            gates += u3_native(float(rng.uniform(0, 2 * math.pi)), 0.0, 0.0, q)
        if r < reps:
            gates += [CX(i, i + 1) for i in range(n - 1)]
    return gates


def _qpe(n, rng):
    m = n - 1
    target = m
    bits = rng.integers(0, 2, size=m)
    gates = [X(target)] + [H(q) for q in range(m)]
    for k in range(m):
        # qubit k controls U^(2^(m-1-k)); phase = 0.b0 b1 ... b(m-1)
        e = m - 1 - k
        frac = sum(int(bits[j]) / 2 ** (j - e + 1) for j in range(e, m))
        gates.append(CP(2 * math.pi * (frac % 1.0), k, target))
    gates += _inverse_qft_gates(list(range(m)))
    return gates


def _random(n, rng):
    gates = []
    for _ in range(n):
        for q in range(n):
            kind = rng.integers(0, 4)
            if kind == 0:
                gates.append(SX(q))
            elif kind == 1:
                gates.append(X(q))
            elif kind == 2:
                gates.append(H(q))
            else:
                gates.append(RZ(float(rng.uniform(0, 2 * math.pi)), q))
        order = rng.permutation(n)
        for i in range(0, n - 1, 2):
            if rng.random() < 0.5:
                gates.append(CX(int(order[i]), int(order[i + 1])))
    return gates


_BUILDERS = {
    "ghz": _ghz, "dj": _dj, "graphstate": _graphstate, "qft": _qft,
    "adder": _adder, "twolocal": _twolocal, "qpe": _qpe, "random": _random,
}


def generate_benchmark(family: str, n_qubits: int, seed: int = 0, native: bool = True) -> Circuit:
    """Build one benchmark circuit; `native=True` lowers it to {rz, sx, x, cx}."""
    if family not in _BUILDERS:
        raise CircuitError(f"unknown benchmark family {family!r}; choose from {FAMILIES}")
    if n_qubits < MIN_QUBITS[family]:
        raise CircuitError(f"{family} needs at least {MIN_QUBITS[family]} qubits, got {n_qubits}")
    rng = np.random.default_rng(seed)
    c = Circuit(n_qubits, _BUILDERS[family](n_qubits, rng), name=f"{family}_n{n_qubits}", family=family)
    return decompose_to_native(c) if native else c
