"""SWAP insertion so every CX lands on a coupling edge.

All routers work on "virtual" qubits (logical qubits plus ancillas, one per physical
qubit) whose physical positions move as SWAPs are applied. SWAPs are emitted as
three CX gates.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..circuit import CX, Circuit, Gate
from .coupling import CouplingMap
from .layout import Layout

ROUTING_METHODS = ("basic", "lookahead", "stochastic", "sabre")
LOOKAHEAD_WINDOW = 20
LOOKAHEAD_DECAY = 0.8
SABRE_EXTENDED_WEIGHT = 0.5
SABRE_DECAY_STEP = 0.001
SABRE_DECAY_RESET = 5


class RoutingError(ValueError):
    pass


@dataclass(frozen=True)
class RoutingResult:
    circuit: Circuit
    layout: Layout
    final_positions: tuple[int, ...]
    permutation: tuple[int, ...]
    n_swaps: int


class _State:
    def __init__(self, pos: list[int], cmap: CouplingMap):
        self.pos = list(pos)
        self.virt = [0] * cmap.n_physical
        for v, p in enumerate(self.pos):
            self.virt[p] = v
        self.cmap = cmap
        self.out: list[Gate] = []
        self.n_swaps = 0

    def emit(self, g: Gate):
        self.out.append(g.remap(self.pos))

    def swap(self, a: int, b: int):
        """Swap the contents of physical qubits a and b."""
        self.out += [CX(a, b), CX(b, a), CX(a, b)]
        va, vb = self.virt[a], self.virt[b]
        self.virt[a], self.virt[b] = vb, va
        self.pos[va], self.pos[vb] = b, a
        self.n_swaps += 1

    def dist(self, g: Gate) -> int:
        a, b = g.qubits
        return int(self.cmap.distance[self.pos[a], self.pos[b]])

    def route_along_path(self, g: Gate):
        path = self.cmap.shortest_path(self.pos[g.qubits[0]], self.pos[g.qubits[1]])
        for i in range(len(path) - 2):
            self.swap(path[i], path[i + 1])

    def reducing_swaps(self, g: Gate) -> list[tuple[int, int]]:
        pc, pt = self.pos[g.qubits[0]], self.pos[g.qubits[1]]
        d = self.cmap.distance
        cur = d[pc, pt]
        out = set()
        for p, other in ((pc, pt), (pt, pc)):
            for nb in self.cmap.adjacency[p]:
                if nb != other and d[nb, other] < cur:
                    out.add((min(p, nb), max(p, nb)))
        return sorted(out)

    def dist_after(self, swap: tuple[int, int], g: Gate) -> int:
        a, b = swap
        pa, pb = self.pos[g.qubits[0]], self.pos[g.qubits[1]]
        pa = b if pa == a else a if pa == b else pa
        pb = b if pb == a else a if pb == b else pb
        return int(self.cmap.distance[pa, pb])


def _sequential(c: Circuit, st: _State, method: str, rng: np.random.Generator):
    cx_idx = [i for i, g in enumerate(c.gates) if g.kind == "cx"]
    j = 0
    for g in c.gates:
        if g.kind != "cx":
            st.emit(g)
            continue
        window = [c.gates[i] for i in cx_idx[j + 1 : j + 1 + LOOKAHEAD_WINDOW]]
        j += 1
        if method == "basic":
            st.route_along_path(g)
        while st.dist(g) > 1:
            cands = st.reducing_swaps(g)
            scores = np.array([
                sum(LOOKAHEAD_DECAY ** i * st.dist_after(s, h) for i, h in enumerate(window)) for s in cands
            ], dtype=float)
            if method == "lookahead":
                pick = int(np.argmin(scores))
            else:  # stochastic: Boltzmann choice over lookahead scores
                w = np.exp(-(scores - scores.min()))
                pick = int(rng.choice(len(cands), p=w / w.sum()))
            st.swap(*cands[pick])
        st.emit(g)


def _sabre(c: Circuit, st: _State, rng: np.random.Generator):
    gates = c.gates
    n_g = len(gates)
    succ: list[list[int]] = [[] for _ in range(n_g)]
    indeg = [0] * n_g
    last: dict[int, int] = {}
    for i, g in enumerate(gates):
        preds = {last[q] for q in g.qubits if q in last}
        for p in preds:
            succ[p].append(i)
        indeg[i] = len(preds)
        for q in g.qubits:
            last[q] = i
    front = sorted(i for i in range(n_g) if indeg[i] == 0)
    done = [False] * n_g
    pending_cx = [i for i, g in enumerate(gates) if g.kind == "cx"]
    decay = np.ones(st.cmap.n_physical)
    stalled = 0
    valve = 3 * st.cmap.n_physical + 10

    def execute(i):
        st.emit(gates[i])
        done[i] = True
        for s in succ[i]:
            indeg[s] -= 1
            if indeg[s] == 0:
                front.append(s)

    while front:
        progressed = True
        while progressed:
            progressed = False
            for i in sorted(front):
                g = gates[i]
                if g.kind != "cx" or st.dist(g) == 1:
                    front.remove(i)
                    execute(i)
                    progressed = True
            if progressed:
                decay[:] = 1.0
                stalled = 0
        if not front:
            break
        front.sort()
        if stalled > valve:
            st.route_along_path(gates[front[0]])
            stalled = 0
            continue
        fset = set(front)
        f_gates = [gates[i] for i in front]
        pending_cx = [i for i in pending_cx if not done[i]]
        ext = [gates[i] for i in pending_cx if i not in fset][:LOOKAHEAD_WINDOW]
        cands = sorted({
            (min(p, nb), max(p, nb))
            for g in f_gates for q in g.qubits for p in (st.pos[q],) for nb in st.cmap.adjacency[p]
        })
        scores = []
        for s in cands:
            h = sum(st.dist_after(s, g) for g in f_gates) / len(f_gates)
            if ext:
                h += SABRE_EXTENDED_WEIGHT * sum(st.dist_after(s, g) for g in ext) / len(ext)
            scores.append(h * max(decay[s[0]], decay[s[1]]))
        scores = np.array(scores)
        best = np.flatnonzero(scores <= scores.min() + 1e-12)
        a, b = cands[int(best[rng.integers(len(best))])]
        st.swap(a, b)
        decay[a] += SABRE_DECAY_STEP
        decay[b] += SABRE_DECAY_STEP
        stalled += 1
        if stalled % SABRE_DECAY_RESET == 0:
            decay[:] = 1.0


def route_virtual(c: Circuit, pos: list[int], cmap: CouplingMap, method: str, seed: int = 0):
    """Route a measurement-free circuit over virtual qubits starting at positions `pos`.

    Returns (routed physical circuit, final positions).
    """
    if method not in ROUTING_METHODS:
        raise RoutingError(f"unknown routing method {method!r}; choose from {ROUTING_METHODS}")
    if c.n_qubits != cmap.n_physical or len(pos) != cmap.n_physical:
        raise RoutingError("virtual circuit must span the whole device")
    st = _State(pos, cmap)
    rng = np.random.default_rng([seed, ROUTING_METHODS.index(method)])
    if method == "sabre":
        _sabre(c, st, rng)
    else:
        _sequential(c, st, method, rng)
    return c.with_gates(st.out), st.pos


def split_measurements(c: Circuit) -> tuple[Circuit, list[Gate]]:
    """Separate the trailing measurement suffix (and barriers mixed into it)."""
    k = next((i for i, g in enumerate(c.gates) if g.kind == "measure"), len(c.gates))
    return c.with_gates(c.gates[:k]), list(c.gates[k:])


def route(c: Circuit, layout: Layout, cmap: CouplingMap, method: str = "sabre", seed: int = 0) -> RoutingResult:
    if len(layout) != c.n_qubits:
        raise RoutingError(f"layout covers {len(layout)} qubits, circuit has {c.n_qubits}")
    for g in c.gates:
        if len(g.qubits) > 2 or (len(g.qubits) == 2 and g.kind != "cx"):
            if g.kind != "barrier":
                raise RoutingError(f"route expects a native circuit, found {g.kind}")
    pos = layout.full(cmap.n_physical)
    body, suffix = split_measurements(c)
    virt = body.with_gates(body.gates, n_qubits=cmap.n_physical)
    routed, final = route_virtual(virt, pos, cmap, method, seed)
    gates = list(routed.gates) + [g.remap(final) for g in suffix]
    perm = [0] * cmap.n_physical
    for v in range(cmap.n_physical):
        perm[pos[v]] = final[v]
    n_swaps = (sum(1 for g in routed.gates if g.kind == "cx") - body.count("cx")) // 3
    return RoutingResult(routed.with_gates(gates), layout, tuple(final), tuple(perm), n_swaps)


def embed(c: Circuit, layout: Layout, n_physical: int) -> Circuit:
    """Place a logical circuit on physical qubits without routing (reference for equivalence)."""
    return c.remap(layout.full(n_physical), n_physical)

