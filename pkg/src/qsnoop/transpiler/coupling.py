"""Device coupling maps."""
from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable

import numpy as np


class CouplingError(ValueError):
    pass


def _norm(e) -> tuple[int, int]:
    a, b = int(e[0]), int(e[1])
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CouplingMap:
    n_physical: int
    edges: frozenset[tuple[int, int]]
    name: str = "custom"

    def __post_init__(self):
        edges = frozenset(_norm(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n_physical < 1:
            raise CouplingError("coupling map needs at least one qubit")
        for a, b in edges:
            if a == b:
                raise CouplingError(f"self-loop on qubit {a}")
            if b >= self.n_physical:
                raise CouplingError(f"edge ({a},{b}) outside {self.n_physical} qubits")
        if self.n_physical > 1 and not self._connected(edges):
            raise CouplingError(f"coupling map {self.name!r} is disconnected")

    def _connected(self, edges) -> bool:
        adj = {q: [] for q in range(self.n_physical)}
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        todo = [0]
        while todo:
            for nb in adj[todo.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    todo.append(nb)
        return len(seen) == self.n_physical

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj = [[] for _ in range(self.n_physical)]
        for a, b in sorted(self.edges):
            adj[a].append(b)
            adj[b].append(a)
        return tuple(tuple(sorted(x)) for x in adj)

    @cached_property
    def distance(self) -> np.ndarray:
        n = self.n_physical
        dist = np.full((n, n), -1, dtype=int)
        for s in range(n):
            dist[s, s] = 0
            q = deque([s])
            while q:
                u = q.popleft()
                for v in self.adjacency[u]:
                    if dist[s, v] < 0:
                        dist[s, v] = dist[s, u] + 1
                        q.append(v)
        return dist

    @cached_property
    def sorted_edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(sorted(self.edges))

    def has_edge(self, a: int, b: int) -> bool:
        return _norm((a, b)) in self.edges

    def neighbors(self, q: int) -> tuple[int, ...]:
        return self.adjacency[q]

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Deterministic shortest path (lowest-index neighbour first)."""
        path = [a]
        while path[-1] != b:
            u = path[-1]
            path.append(next(v for v in self.adjacency[u] if self.distance[v, b] == self.distance[u, b] - 1))
        return path

    def induced_edges(self, nodes: Iterable[int]) -> list[tuple[int, int]]:
        s = set(nodes)
        return [e for e in self.sorted_edges if e[0] in s and e[1] in s]

    def subgraph(self, nodes: Iterable[int]) -> tuple["CouplingMap", list[int]]:
        """Induced sub-map relabelled 0..k-1, plus the new->old index list."""
        old = sorted(set(nodes))
        idx = {q: i for i, q in enumerate(old)}
        edges = [(idx[a], idx[b]) for a, b in self.induced_edges(old)]
        return CouplingMap(len(old), frozenset(edges), f"{self.name}[{','.join(map(str, old))}]"), old

    def to_dict(self) -> dict:
        return {"name": self.name, "n_physical": self.n_physical, "edges": [list(e) for e in self.sorted_edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "CouplingMap":
        return cls(int(d["n_physical"]), frozenset(_norm(e) for e in d["edges"]), d.get("name", "custom"))


LAGOS7_EDGES = [(0, 1), (1, 2), (1, 3), (3, 5), (4, 5), (5, 6)]
GUADALUPE16_EDGES = [
    (0, 1), (1, 2), (1, 4), (2, 3), (3, 5), (4, 7), (5, 8), (6, 7),
    (7, 10), (8, 9), (8, 11), (10, 12), (11, 14), (12, 13), (12, 15), (13, 14),
]
HEAVY_HEX_WIDTH = 11


def heavy_hex_edges(rows: int, width: int = HEAVY_HEX_WIDTH) -> tuple[int, list[tuple[int, int]]]:
    """Rows of `width` qubits joined by bridge qubits on alternating columns."""
    edges = []
    n = 0
    prev_row = None
    for r in range(rows):
        if prev_row is not None:
            offset = 0 if (r - 1) % 2 == 0 else 2
            bridges = list(range(offset, width, 4))
            bridge_ids = list(range(n, n + len(bridges)))
            n += len(bridges)
            row = list(range(n, n + width))
            for col, bq in zip(bridges, bridge_ids):
                edges += [(prev_row[col], bq), (bq, row[col])]
        else:
            row = list(range(n, n + width))
        n += width
        edges += [(row[i], row[i + 1]) for i in range(width - 1)]
        prev_row = row
    return n, edges


_SPEC = re.compile(r"^\s*(line|ring|heavy_hex)\s*\(\s*(\d+)\s*\)\s*$")


def build_coupling_map(spec: str) -> CouplingMap:
    """Named topology: line(n), ring(n), lagos7, guadalupe16, heavy_hex(rows), or a JSON file path."""
    if spec == "lagos7":
        return CouplingMap(7, frozenset(LAGOS7_EDGES), "lagos7")
    if spec == "guadalupe16":
        return CouplingMap(16, frozenset(GUADALUPE16_EDGES), "guadalupe16")
    m = _SPEC.match(spec)
    if m:
        kind, k = m.group(1), int(m.group(2))
        if kind == "heavy_hex":
            if k < 1:
                raise CouplingError("heavy_hex needs at least one row")
            n, edges = heavy_hex_edges(k)
            return CouplingMap(n, frozenset(edges), f"heavy_hex({k})")
        if k < 2:
            raise CouplingError(f"{kind} needs n >= 2")
        edges = [(i, i + 1) for i in range(k - 1)]
        if kind == "ring" and k > 2:
            edges.append((k - 1, 0))
        return CouplingMap(k, frozenset(edges), f"{kind}({k})")
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return CouplingMap.from_dict(json.loads(path.read_text()))
    raise CouplingError(f"malformed coupling map spec {spec!r}")
