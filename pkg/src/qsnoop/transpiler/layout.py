"""Initial placement of logical qubits onto a coupling map."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from ..circuit import Circuit, pair
from .coupling import CouplingMap

LAYOUT_METHODS = ("trivial", "dense", "vf2", "sabre")
DENSE_EXHAUSTIVE_LIMIT = 20000
VF2_STEP_BUDGET = 200_000


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Layout:
    """logical_to_physical[i] is the physical home of logical qubit i."""

    logical_to_physical: tuple[int, ...]
    method: str = "trivial"
    fallback: bool = False

    def __post_init__(self):
        l2p = tuple(int(p) for p in self.logical_to_physical)
        object.__setattr__(self, "logical_to_physical", l2p)
        if len(set(l2p)) != len(l2p):
            raise LayoutError(f"layout is not injective: {l2p}")
        if any(p < 0 for p in l2p):
            raise LayoutError("negative physical index")

    def __getitem__(self, i: int) -> int:
        return self.logical_to_physical[i]

    def __len__(self) -> int:
        return len(self.logical_to_physical)

    def full(self, n_physical: int) -> list[int]:
        """Extend to a permutation of all physical qubits; ancillas take free slots in order."""
        used = set(self.logical_to_physical)
        if any(p >= n_physical for p in used):
            raise LayoutError(f"layout {self.logical_to_physical} exceeds {n_physical} physical qubits")
        free = [p for p in range(n_physical) if p not in used]
        return list(self.logical_to_physical) + free


def interaction_weights(c: Circuit) -> Counter:
    return Counter(pair(*g.qubits) for g in c.gates if g.kind == "cx")


def _check_fits(c: Circuit, cmap: CouplingMap):
    if c.n_qubits > cmap.n_physical:
        raise LayoutError(f"circuit has {c.n_qubits} qubits, device {cmap.name} only {cmap.n_physical}")


def _is_connected(nodes: tuple[int, ...], cmap: CouplingMap) -> bool:
    s = set(nodes)
    seen = {nodes[0]}
    todo = [nodes[0]]
    while todo:
        for nb in cmap.adjacency[todo.pop()]:
            if nb in s and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(s)


def _edge_count(nodes, cmap: CouplingMap) -> int:
    s = set(nodes)
    return sum(1 for a, b in cmap.edges if a in s and b in s)


def dense_subset(k: int, cmap: CouplingMap) -> tuple[int, ...]:
    """Connected k-subset with the most internal edges; ties go to the lexicographically lowest set."""
    n = cmap.n_physical
    if k > n:
        raise LayoutError(f"need {k} qubits, device has {n}")
    if k == 0:
        return ()
    if math.comb(n, k) <= DENSE_EXHAUSTIVE_LIMIT:
        best, best_e = None, -1
        for sub in combinations(range(n), k):
            e = _edge_count(sub, cmap)
            if e > best_e and _is_connected(sub, cmap):
                best, best_e = sub, e
        return best
    # greedy growth from every seed, keeping the best result
    best, best_e = None, -1
    for seed in range(n):
        s = {seed}
        while len(s) < k:
            frontier = sorted({nb for q in s for nb in cmap.adjacency[q]} - s)
            gain = [sum(1 for nb in cmap.adjacency[f] if nb in s) for f in frontier]
            s.add(frontier[int(np.argmax(gain))])
        sub = tuple(sorted(s))
        e = _edge_count(sub, cmap)
        if e > best_e or (e == best_e and sub < best):
            best, best_e = sub, e
    return best


def _place_on_subset(c: Circuit, subset: tuple[int, ...], cmap: CouplingMap) -> list[int]:
    """Greedy assignment of logical qubits to subset nodes by interaction weight."""
    w = interaction_weights(c)
    n = c.n_qubits
    wm = np.zeros((n, n))
    for (a, b), v in w.items():
        wm[a, b] = wm[b, a] = v
    sset = set(subset)
    sub_deg = {p: sum(1 for nb in cmap.adjacency[p] if nb in sset) for p in subset}
    dist = cmap.distance
    l2p = [-1] * n
    free = list(subset)
    placed: list[int] = []
    while len(placed) < n:
        unplaced = [q for q in range(n) if l2p[q] < 0]
        if placed:
            key = lambda q: (wm[q, placed].sum(), wm[q].sum(), -q)
        else:
            key = lambda q: (wm[q].sum(), -q)
        q = max(unplaced, key=key)
        if placed:
            cost = lambda p: (sum(wm[q, r] * dist[p, l2p[r]] for r in placed), -sub_deg[p], p)
        else:
            cost = lambda p: (-sub_deg[p], p)
        p = min(free, key=cost)
        l2p[q] = p
        free.remove(p)
        placed.append(q)
    return l2p


def dense_layout(c: Circuit, cmap: CouplingMap) -> Layout:
    _check_fits(c, cmap)
    subset = dense_subset(c.n_qubits, cmap)
    return Layout(tuple(_place_on_subset(c, subset, cmap)), "dense")


def vf2_embeddings(c: Circuit, cmap: CouplingMap, budget: int = VF2_STEP_BUDGET) -> Iterator[tuple[int, ...]]:
    """Backtracking subgraph monomorphisms of the interaction graph into the coupling map.

    Yields logical->physical tuples in a deterministic order; stops silently once the
    step budget is spent.
    """
    _check_fits(c, cmap)
    n = c.n_qubits
    adj: dict[int, set[int]] = {q: set() for q in range(n)}
    for a, b in interaction_weights(c):
        adj[a].add(b)
        adj[b].add(a)
    # BFS order over components, highest degree first
    order: list[int] = []
    seen: set[int] = set()
    for root in sorted(range(n), key=lambda q: (-len(adj[q]), q)):
        if root in seen or not adj[root]:
            continue
        seen.add(root)
        queue = [root]
        while queue:
            u = queue.pop(0)
            order.append(u)
            for v in sorted(adj[u], key=lambda q: (-len(adj[q]), q)):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
    isolated = [q for q in range(n) if not adj[q]]
    cadj = [set(x) for x in cmap.adjacency]
    steps = [0]
    l2p: dict[int, int] = {}
    used: set[int] = set()

    def candidates(u: int) -> list[int]:
        mapped_nb = [l2p[v] for v in adj[u] if v in l2p]
        if mapped_nb:
            cand = set.intersection(*(cadj[p] for p in mapped_nb)) - used
        else:
            cand = set(range(cmap.n_physical)) - used
        return sorted(p for p in cand if len(cadj[p]) >= len(adj[u]))

    def fill_isolated() -> tuple[int, ...]:
        out = dict(l2p)
        free = sorted(set(range(cmap.n_physical)) - used,
                      key=lambda p: (not any(nb in used for nb in cadj[p]), p))
        for q, p in zip(isolated, free):
            out[q] = p
        return tuple(out[q] for q in range(n))

    def rec(i: int):
        if steps[0] > budget:
            return
        if i == len(order):
            yield fill_isolated()
            return
        u = order[i]
        for p in candidates(u):
            steps[0] += 1
            if steps[0] > budget:
                return
            l2p[u] = p
            used.add(p)
            yield from rec(i + 1)
            del l2p[u]
            used.discard(p)

    yield from rec(0)


def vf2_layout(c: Circuit, cmap: CouplingMap, budget: int = VF2_STEP_BUDGET) -> Layout:
    for emb in vf2_embeddings(c, cmap, budget):
        return Layout(emb, "vf2")
    return Layout(dense_layout(c, cmap).logical_to_physical, "vf2", fallback=True)


def sabre_layout(c: Circuit, cmap: CouplingMap, seed: int = 0, iterations: int = 3) -> Layout:
    """Random start refined by alternating forward and backward routing passes."""
    from .routing import route_virtual  # local import: routing depends on Layout

    _check_fits(c, cmap)
    rng = np.random.default_rng([seed, 0x5AB2E])
    n_phys = cmap.n_physical
    full = [int(p) for p in rng.permutation(n_phys)]
    twoq = [g for g in c.gates if g.kind == "cx"]
    fwd = Circuit(n_phys, twoq)
    bwd = fwd.with_gates(list(reversed(twoq)))
    for it in range(iterations):
        _, final = route_virtual(fwd, full, cmap, "sabre", seed + 2 * it)
        _, back = route_virtual(bwd, final, cmap, "sabre", seed + 2 * it + 1)
        full = back
    return Layout(tuple(full[: c.n_qubits]), "sabre")


def apply_layout(c: Circuit, cmap: CouplingMap, method: str = "trivial", seed: int = 0) -> Layout:
    _check_fits(c, cmap)
    if method == "trivial":
        return Layout(tuple(range(c.n_qubits)), "trivial")
    if method == "dense":
        return dense_layout(c, cmap)
    if method == "vf2":
        return vf2_layout(c, cmap)
    if method == "sabre":
        return sabre_layout(c, cmap, seed)
    raise LayoutError(f"unknown layout method {method!r}; choose from {LAYOUT_METHODS}")
