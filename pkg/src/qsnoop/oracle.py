"""Small statevector simulator used as a correctness oracle.

Qubit 0 is the least-significant bit of the basis index.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate

MAX_SIM_QUBITS = 12
MAX_EQUIV_QUBITS = 5

_S2 = 1 / np.sqrt(2)
_FIXED = {
    "h": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "sx": 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex),
}


class OracleLimitError(ValueError):
    pass


def single_qubit_matrix(g: Gate) -> np.ndarray:
    if g.kind == "rz":
        t = g.param
        return np.array([[np.exp(-0.5j * t), 0], [0, np.exp(0.5j * t)]], dtype=complex)
    return _FIXED[g.kind]


def _view(state: np.ndarray, n: int) -> np.ndarray:
    # axis k of the tensor corresponds to qubit n-1-k; trailing axes (if any) are a batch
    return state.reshape((2,) * n + state.shape[1:])


def _axis(q: int, n: int) -> int:
    return n - 1 - q


def apply_gate(state: np.ndarray, g: Gate, n: int) -> np.ndarray:
    """Apply g to a state vector, or to each column of a (2**n, k) batch."""
    shape = state.shape
    if g.kind in ("barrier", "delay"):
        return state
    if g.kind == "measure":
        raise ValueError("oracle does not simulate measurement")
    psi = _view(state, n)
    if g.kind in ("h", "x", "sx", "rz"):
        ax = _axis(g.qubits[0], n)
        out = np.tensordot(single_qubit_matrix(g), psi, axes=([1], [ax]))
        return np.moveaxis(out, 0, ax).reshape(shape)
    psi = psi.copy()
    if g.kind == "cx":
        c, t = (_axis(q, n) for q in g.qubits)
        idx = [slice(None)] * n
        idx[c] = 1
        sub = psi[tuple(idx)]
        t_ax = t if t < c else t - 1
        psi[tuple(idx)] = np.flip(sub, axis=t_ax)
        return psi.reshape(shape)
    if g.kind == "swap":
        a, b = (_axis(q, n) for q in g.qubits)
        return np.swapaxes(psi, a, b).reshape(shape)
    if g.kind == "cp":
        c, t = (_axis(q, n) for q in g.qubits)
        idx = [slice(None)] * n
        idx[c] = 1
        idx[t] = 1
        psi[tuple(idx)] *= np.exp(1j * g.param)
        return psi.reshape(shape)
    if g.kind == "ccx":
        a, b, t = (_axis(q, n) for q in g.qubits)
        idx = [slice(None)] * n
        idx[a] = 1
        idx[b] = 1
        sub = psi[tuple(idx)]
        t_ax = t - sum(1 for ax in (a, b) if ax < t)
        psi[tuple(idx)] = np.flip(sub, axis=t_ax)
        return psi.reshape(shape)
    raise ValueError(f"oracle cannot apply {g.kind}")


def run(c: Circuit, state: np.ndarray) -> np.ndarray:
    for g in c.gates:
        state = apply_gate(state, g, c.n_qubits)
    return state


def simulate_statevector(c: Circuit) -> np.ndarray:
    if c.n_qubits > MAX_SIM_QUBITS:
        raise OracleLimitError(f"{c.n_qubits} qubits exceeds oracle limit {MAX_SIM_QUBITS}")
    if any(g.kind == "measure" for g in c.gates):
        raise ValueError("strip measurements before simulating")
    state = np.zeros(2 ** c.n_qubits, dtype=complex)
    state[0] = 1.0
    return run(c, state)


def probabilities(state: np.ndarray) -> dict[int, float]:
    p = np.abs(state) ** 2
    return {i: float(v) for i, v in enumerate(p) if v > 1e-12}


def permute_state(state: np.ndarray, perm: Sequence[int], n: int) -> np.ndarray:
    """Move the content of qubit i to qubit perm[i]."""
    psi = _view(state, n)
    # new axis for qubit perm[i] takes old axis of qubit i
    src = [_axis(i, n) for i in range(n)]
    dst = [_axis(perm[i], n) for i in range(n)]
    return np.moveaxis(psi, src, dst).reshape(state.shape)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Columns are the images of the computational basis states."""
    c = c.without_measurements()
    return run(c, np.eye(2 ** c.n_qubits, dtype=complex))


def unitary_equivalent(a: Circuit, b: Circuit, perm: Sequence[int] | None = None, atol: float = 1e-8) -> bool:
    """True iff b equals (qubit permutation perm) after a, up to one global phase.

    Measurements are ignored. perm[i] is where qubit i of `a` ends up in `b`.
    """
    if a.n_qubits != b.n_qubits:
        raise ValueError("qubit counts differ")
    n = a.n_qubits
    if n > MAX_EQUIV_QUBITS:
        raise OracleLimitError(f"{n} qubits exceeds equivalence limit {MAX_EQUIV_QUBITS}")
    ua = circuit_unitary(a)
    ub = circuit_unitary(b)
    if perm is not None:
        ua = permute_state(ua, perm, n)
    i = np.unravel_index(np.argmax(np.abs(ua)), ua.shape)
    if abs(ub[i]) < 1e-12:
        return False
    phase = ub[i] / ua[i]
    if abs(abs(phase) - 1) > atol:
        return False
    return bool(np.allclose(ub, phase * ua, atol=atol, rtol=0))
