"""Constructed graph datasets with known answers, for checking the classifiers."""
from __future__ import annotations

import numpy as np

from .encoder import CircuitGraph, Dataset, stratified_split

# Two 6-node templates with the same degree sequence [1, 1, 2, 2, 1, 1]:
# A joins the two degree-2 nodes (path 0-2-3-1 plus edge 4-5),
# B keeps them apart (paths 0-2-1 and 4-3-5).
TOPOLOGY_TEMPLATES = {
    "chain4+pair": ((0, 2), (2, 3), (3, 1), (4, 5)),
    "two_chains3": ((0, 2), (2, 1), (4, 3), (3, 5)),
}


def _graph(n_slots: int, edges, weight: float, label: int, name: str) -> CircuitGraph:
    total = np.zeros(n_slots)
    degree = np.zeros(n_slots)
    for a, b in edges:
        total[[a, b]] += weight
        degree[[a, b]] += 1
    feats = np.column_stack([(total > 0).astype(float), degree, total, total])  # one time bucket
    return CircuitGraph(feats, tuple(edges), tuple(weight for _ in edges), label, 1.0, name)


def topology_only_dataset(per_class: int = 40, n_slots: int = 16, seed: int = 0,
                          split_fraction: float = 0.75) -> Dataset:
    """Classes that share every node-feature multiset and differ only in which nodes are joined.

    Template nodes land on random slots, so a flattened feature matrix carries no class signal.
    """
    rng = np.random.default_rng([seed, 0x70F0])
    graphs, labels = [], []
    names = list(TOPOLOGY_TEMPLATES)
    for i in range(per_class):
        for lab, name in enumerate(names):
            slots = rng.permutation(n_slots)[:6]
            w = float(rng.integers(1, 4))
            edges = [(int(slots[a]), int(slots[b])) for a, b in TOPOLOGY_TEMPLATES[name]]
            graphs.append(_graph(n_slots, edges, w, lab, f"{name}_{i}"))
            labels.append(lab)
    labels = np.array(labels)
    train, test = stratified_split(labels, split_fraction, seed)
    return Dataset(graphs, labels, names, train, test, 1, 1.0, seed, {"kind": "topology_only"})


def heavy_edge_dataset(per_class: int = 20, n_slots: int = 6, seed: int = 0) -> Dataset:
    """Two classes on a 6-ring with three heavy edges: contiguous (class 0) or alternating (class 1).

    Rotating the ring maps each class onto itself, so the classes stay distinct up to isomorphism.
    """
    rng = np.random.default_rng([seed, 0x5E9])
    ring = [(i, (i + 1) % n_slots) for i in range(n_slots)]
    graphs, labels = [], []
    for i in range(per_class):
        for lab in (0, 1):
            w = rng.uniform(0.5, 1.0, n_slots)
            heavy = np.arange(n_slots // 2) if lab == 0 else np.arange(0, n_slots, 2)
            w[heavy] += 4.0
            total = np.zeros(n_slots)
            for (a, b), wt in zip(ring, w):
                total[[a, b]] += wt
            feats = np.column_stack([np.ones(n_slots), np.full(n_slots, 2.0), total, total])
            graphs.append(CircuitGraph(feats, tuple(ring), tuple(float(x) for x in w), lab, 1.0, f"ring{lab}_{i}"))
            labels.append(lab)
    labels = np.array(labels)
    train, test = stratified_split(labels, 0.75, seed)
    return Dataset(graphs, labels, ["contiguous", "alternating"], train, test, 1, 1.0, seed, {"kind": "heavy_edge"})

