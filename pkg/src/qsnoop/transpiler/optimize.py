"""Peephole optimization: O0 (identity) and O3lite (fixed point of gate-reducing rewrites)."""
from __future__ import annotations

import math

import numpy as np

from ..circuit import RZ, SX, Circuit, Gate, X
from ..oracle import single_qubit_matrix
from .routing import split_measurements

OPT_LEVELS = ("O0", "O3lite")
_ATOL = 1e-9
_ONE_QUBIT = frozenset({"rz", "sx", "x"})


class OptimizeError(ValueError):
    pass


def _wrap(a: float) -> float:
    """Angle into (-pi, pi]."""
    a = math.remainder(a, 2 * math.pi)
    return math.pi if math.isclose(a, -math.pi, abs_tol=_ATOL) else a


def _is_zero_angle(a: float) -> bool:
    return abs(_wrap(a)) < _ATOL


def merge_rz(run: list[Gate]) -> list[Gate]:
    """Fuse neighbouring RZ gates and drop those equal to identity up to phase."""
    out: list[Gate] = []
    for g in run:
        if g.kind == "rz" and out and out[-1].kind == "rz":
            out[-1] = RZ(out[-1].param + g.param, g.qubits[0])
        else:
            out.append(g)
    return [g for g in out if not (g.kind == "rz" and _is_zero_angle(g.param))]


def _run_matrix(run: list[Gate]) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for g in run:
        u = single_qubit_matrix(g) @ u
    return u


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """(theta, phi, lam) with u ~ RZ(phi) RY(theta) RZ(lam) up to global phase."""
    det = np.linalg.det(u)
    su = u / np.sqrt(det)
    theta = 2 * math.atan2(abs(su[1, 0]), abs(su[0, 0]))
    plus = 2 * np.angle(su[1, 1]) if abs(su[1, 1]) > _ATOL else 0.0
    minus = 2 * np.angle(su[1, 0]) if abs(su[1, 0]) > _ATOL else 0.0
    phi = (plus + minus) / 2
    lam = (plus - minus) / 2
    return theta, float(phi), float(lam)


def resynthesize(run: list[Gate], q: int) -> list[Gate]:
    """Shortest of the canonical RZ/SX/X forms for the run's unitary."""
    u = _run_matrix(run)
    theta, phi, lam = zyz_angles(u)
    if abs(theta) < 1e-7:
        forms = [[RZ(phi + lam, q)]]
    elif abs(theta - math.pi / 2) < 1e-7:
        forms = [[RZ(lam - math.pi / 2, q), SX(q), RZ(phi + math.pi / 2, q)]]
    elif abs(theta - math.pi) < 1e-7:
        forms = [[RZ(lam - math.pi / 2, q), X(q), RZ(phi + math.pi / 2, q)]]
    else:
        forms = [[RZ(lam, q), SX(q), RZ(theta + math.pi, q), SX(q), RZ(phi + 3 * math.pi, q)]]
    best = None
    for f in forms:
        f = merge_rz(f)
        if np.allclose(_phase_free(_run_matrix(f)), _phase_free(u), atol=1e-7):
            if best is None or len(f) < len(best):
                best = f
    return best if best is not None else run


def _phase_free(u: np.ndarray) -> np.ndarray:
    i = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    return u * (abs(u[i]) / u[i])


def _optimize_run(run: list[Gate], q: int) -> list[Gate]:
    merged = merge_rz(run)
    if len(merged) <= 1:
        return merged
    alt = resynthesize(merged, q)
    return alt if len(alt) < len(merged) else merged


def single_qubit_pass(gates: list[Gate], n_qubits: int) -> list[Gate]:
    pending: list[list[Gate]] = [[] for _ in range(n_qubits)]
    out: list[Gate] = []
    for g in gates:
        if g.kind in _ONE_QUBIT:
            pending[g.qubits[0]].append(g)
            continue
        for q in g.qubits:
            out += _optimize_run(pending[q], q)
            pending[q] = []
        out.append(g)
    for q in range(n_qubits):
        out += _optimize_run(pending[q], q)
    return out


def cancel_cx_pass(gates: list[Gate], n_qubits: int) -> list[Gate]:
    """Remove CX pairs that are adjacent on both of their wires."""
    slots: list[Gate | None] = []
    last: list[list[int]] = [[] for _ in range(n_qubits)]
    for g in gates:
        if g.kind == "cx":
            a, b = g.qubits
            if last[a] and last[b] and last[a][-1] == last[b][-1]:
                k = last[a][-1]
                if slots[k] == g:
                    slots[k] = None
                    last[a].pop()
                    last[b].pop()
                    continue
        slots.append(g)
        for q in g.qubits:
            last[q].append(len(slots) - 1)
    return [g for g in slots if g is not None]


def optimize(c: Circuit, level: str = "O3lite") -> Circuit:
    if level == "O0":
        return c
    if level != "O3lite":
        raise OptimizeError(f"unknown optimization level {level!r}; choose from {OPT_LEVELS}")
    body, suffix = split_measurements(c)
    gates = list(body.gates)
    bad = [g.kind for g in gates if g.kind not in _ONE_QUBIT | {"cx", "barrier", "delay"}]
    if bad:
        raise OptimizeError(f"optimize expects a native circuit, found {bad[0]}")
    # every pass is gate-reducing or neutral, so iterate until no strict reduction
    while True:
        new = cancel_cx_pass(single_qubit_pass(gates, c.n_qubits), c.n_qubits)
        if len(new) >= len(gates):
            break
        gates = new
    return c.with_gates(gates + suffix)
