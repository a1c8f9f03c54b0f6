"""Gate-list intermediate representation for quantum circuits."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

# kind -> operand count (None means variadic)
ARITY: dict[str, int | None] = {
    "h": 1,
    "x": 1,
    "sx": 1,
    "rz": 1,
    "cx": 2,
    "swap": 2,
    "cp": 2,
    "ccx": 3,
    "barrier": None,
    "delay": 1,
    "measure": 1,
}
PARAMETRIC = {"rz", "cp", "delay"}
NATIVE = frozenset({"rz", "sx", "x", "cx", "barrier", "delay", "measure"})


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    param: float | None = None

    def __post_init__(self):
        if self.kind not in ARITY:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        arity = ARITY[self.kind]
        if arity is not None and len(self.qubits) != arity:
            raise CircuitError(f"{self.kind} takes {arity} operands, got {len(self.qubits)}")
        if arity is None and not self.qubits:
            raise CircuitError("barrier needs at least one operand")
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitError(f"repeated operand in {self.kind}{self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise CircuitError("negative qubit index")
        if self.kind in PARAMETRIC:
            if self.param is None or not math.isfinite(self.param):
                raise CircuitError(f"{self.kind} needs a finite parameter")
            if self.kind == "delay" and self.param < 0:
                raise CircuitError("negative delay")
        elif self.param is not None:
            raise CircuitError(f"{self.kind} takes no parameter")

    @property
    def is_two_qubit(self) -> bool:
        return self.kind in ("cx", "swap", "cp")

    def remap(self, mapping: Sequence[int] | dict[int, int]) -> "Gate":
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.param)

    def __str__(self) -> str:
        p = "" if self.param is None else f"({self.param:.6g})"
        return f"{self.kind}{p} " + ",".join(map(str, self.qubits))


# shorthand constructors
def H(q): return Gate("h", (q,))
def X(q): return Gate("x", (q,))
def SX(q): return Gate("sx", (q,))
def RZ(theta, q): return Gate("rz", (q,), float(theta))
def CX(c, t): return Gate("cx", (c, t))
def SWAP(a, b): return Gate("swap", (a, b))
def CP(theta, c, t): return Gate("cp", (c, t), float(theta))
def CCX(a, b, t): return Gate("ccx", (a, b, t))
def Barrier(*qs): return Gate("barrier", tuple(qs))
def Delay(duration, q): return Gate("delay", (q,), float(duration))
def Measure(q): return Gate("measure", (q,))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    name: str = "circuit"
    family: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 0:
            raise CircuitError("negative qubit count")
        seen_measure = False
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise CircuitError(f"operand out of range in {g} (n_qubits={self.n_qubits})")
            if g.kind == "measure":
                seen_measure = True
            elif seen_measure and g.kind != "barrier":
                raise CircuitError("measurements must form a trailing suffix")

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def with_gates(self, gates: Iterable[Gate], n_qubits: int | None = None) -> "Circuit":
        return Circuit(self.n_qubits if n_qubits is None else n_qubits, tuple(gates), self.name, self.family)

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def without_measurements(self) -> "Circuit":
        return self.with_gates(g for g in self.gates if g.kind != "measure")

    def remap(self, mapping: Sequence[int] | dict[int, int], n_qubits: int) -> "Circuit":
        return self.with_gates((g.remap(mapping) for g in self.gates), n_qubits)

    def inverse(self) -> "Circuit":
        out: list[Gate] = []
        for g in reversed(self.gates):
            if g.kind != "measure":
                out.extend(_inverse_gates(g))
        return self.with_gates(out)


def _inverse_gates(g: Gate) -> list[Gate]:
    if g.kind in ("rz", "cp"):
        return [Gate(g.kind, g.qubits, -g.param)]
    if g.kind == "sx":
        return [g, g, g]
    return [g]


@dataclass(frozen=True)
class CircuitStats:
    cnot_total: int
    depth: int
    per_pair_counts: dict[tuple[int, int], int] = field(default_factory=dict)
    avg_cnot_per_pair: float = 0.0


def pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def circuit_depth(c: Circuit) -> int:
    """Longest dependency chain; barriers cut across every qubit."""
    level = [0] * c.n_qubits
    floor = 0
    for g in c.gates:
        if g.kind == "barrier":
            floor = max([floor] + level)
            continue
        d = max([floor] + [level[q] for q in g.qubits]) + 1
        for q in g.qubits:
            level[q] = d
    return max([floor] + level) if c.n_qubits else 0


def circuit_stats(c: Circuit) -> CircuitStats:
    counts = Counter(pair(*g.qubits) for g in c.gates if g.kind == "cx")
    total = sum(counts.values())
    avg = total / len(counts) if counts else 0.0
    return CircuitStats(total, circuit_depth(c), dict(counts), avg)


# ---------------------------------------------------------------------------
# native decomposition


def _h_native(q):
    return [RZ(math.pi / 2, q), SX(q), RZ(math.pi / 2, q)]


def _cp_native(theta, c, t):
    return [RZ(theta / 2, c), CX(c, t), RZ(-theta / 2, t), CX(c, t), RZ(theta / 2, t)]


def _ccx_native(a, b, t):
    T = math.pi / 4
    return [
        *_h_native(t),
        CX(b, t), RZ(-T, t), CX(a, t), RZ(T, t), CX(b, t), RZ(-T, t), CX(a, t),
        RZ(T, b), RZ(T, t),
        *_h_native(t),
        CX(a, b), RZ(T, a), RZ(-T, b), CX(a, b),
    ]


def native_expansion(g: Gate) -> list[Gate]:
    if g.kind in NATIVE:
        return [g]
    if g.kind == "h":
        return _h_native(g.qubits[0])
    if g.kind == "swap":
        a, b = g.qubits
        return [CX(a, b), CX(b, a), CX(a, b)]
    if g.kind == "cp":
        return _cp_native(g.param, *g.qubits)
    if g.kind == "ccx":
        return _ccx_native(*g.qubits)
    raise CircuitError(f"no native rule for {g.kind}")


def decompose_to_native(c: Circuit) -> Circuit:
    out: list[Gate] = []
    for g in c.gates:
        out.extend(native_expansion(g))
    return c.with_gates(out)


def u3_native(theta: float, phi: float, lam: float, q: int) -> list[Gate]:
    """U3(theta, phi, lam) as RZ/SX gates, exact up to global phase."""
    return [RZ(lam, q), SX(q), RZ(theta + math.pi, q), SX(q), RZ(phi + 3 * math.pi, q)]
