"""CNOT traces to attributed qubit graphs, and labelled datasets of them."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .traces import CnotTrace

N_STATIC_FEATURES = 3  # active flag, distinct-partner degree, total CX


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class CircuitGraph:
    node_features: np.ndarray                  # (N, 3 + b_max)
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]
    label: int = -1
    resolution: float = 1.0
    name: str = ""

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def n_features(self) -> int:
        return self.node_features.shape[1]

    @property
    def b_max(self) -> int:
        return self.n_features - N_STATIC_FEATURES

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for (x, y), w in zip(self.edges, self.weights):
            a[x, y] = a[y, x] = w
        return a

    def permuted(self, perm: Sequence[int]) -> "CircuitGraph":
        """Relabel node i as perm[i]."""
        perm = np.asarray(perm)
        feats = np.empty_like(self.node_features)
        feats[perm] = self.node_features
        edges = tuple((int(perm[x]), int(perm[y])) for x, y in self.edges)
        return CircuitGraph(feats, edges, self.weights, self.label, self.resolution, self.name)


def to_resolution(t: CnotTrace, resolution: float) -> CnotTrace:
    if resolution < 1:
        raise EncodingError(f"resolution {resolution} below one CX duration")
    tb = int(round(resolution * t.cx_duration))
    if t.bucket_duration > tb:
        raise EncodingError(f"trace bucket {t.bucket_duration} dt is coarser than requested {tb} dt")
    return t.rebucket(tb)


def encode_graph(t: CnotTrace, resolution: float = 1.0, b_max: int | None = None, label: int = -1) -> CircuitGraph:
    t = to_resolution(t, resolution)
    b_max = t.n_buckets if b_max is None else int(b_max)
    if b_max < 1:
        raise EncodingError("b_max must be positive")
    qb = t.qubit_bucket_matrix()
    temporal = np.zeros((t.n_qubits, b_max))
    k = min(b_max, t.n_buckets)
    temporal[:, :k] = qb[:, :k]
    if t.n_buckets > b_max:
        temporal[:, -1] += qb[:, b_max:].sum(axis=1)
    totals = qb.sum(axis=1)
    ew = t.edge_totals()
    degree = np.zeros(t.n_qubits)
    for x, y in ew:
        degree[x] += 1
        degree[y] += 1
    feats = np.column_stack([(totals > 0).astype(float), degree, totals, temporal])
    return CircuitGraph(feats, tuple(ew), tuple(float(w) for w in ew.values()), label, float(resolution), t.label or "")


@dataclass
class Dataset:
    graphs: list[CircuitGraph]
    labels: np.ndarray
    class_names: list[str]
    train_idx: np.ndarray
    test_idx: np.ndarray
    b_max: int
    resolution: float
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_features(self) -> int:
        return self.graphs[0].n_features

    def subset(self, idx) -> list[CircuitGraph]:
        return [self.graphs[i] for i in idx]

    def with_graphs(self, graphs: list[CircuitGraph]) -> "Dataset":
        """Same labels and split, different graphs (e.g. after a defense)."""
        if len(graphs) != len(self.graphs):
            raise EncodingError("replacement graph count differs")
        return Dataset(graphs, self.labels, self.class_names, self.train_idx, self.test_idx,
                       self.b_max, self.resolution, self.seed, dict(self.meta))

    # directory IO ------------------------------------------------------
    def save(self, path: str | Path):
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        for i, g in enumerate(self.graphs):
            with open(path / f"g{i:05d}_nodes.csv", "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["node", "active", "degree", "total"] + [f"b{k}" for k in range(g.b_max)])
                for n, row in enumerate(g.node_features):
                    w.writerow([n] + [repr(float(v)) for v in row])
            with open(path / f"g{i:05d}_edges.csv", "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["qubit_a", "qubit_b", "weight"])
                for (x, y), wt in zip(g.edges, g.weights):
                    w.writerow([x, y, repr(float(wt))])
        manifest = {
            "labels": [int(v) for v in self.labels], "names": [g.name for g in self.graphs],
            "class_names": self.class_names, "b_max": self.b_max, "resolution": self.resolution,
            "seed": self.seed, "train": [int(i) for i in self.train_idx], "test": [int(i) for i in self.test_idx],
            "meta": self.meta,
        }
        (path / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        path = Path(path)
        man = json.loads((path / "manifest.json").read_text())
        graphs = []
        for i, (lab, name) in enumerate(zip(man["labels"], man["names"])):
            with open(path / f"g{i:05d}_nodes.csv") as f:
                rows = list(csv.reader(f))[1:]
            feats = np.array([[float(v) for v in r[1:]] for r in rows])
            with open(path / f"g{i:05d}_edges.csv") as f:
                erows = list(csv.reader(f))[1:]
            edges = tuple((int(r[0]), int(r[1])) for r in erows)
            weights = tuple(float(r[2]) for r in erows)
            graphs.append(CircuitGraph(feats, edges, weights, lab, man["resolution"], name))
        return cls(graphs, np.array(man["labels"]), man["class_names"], np.array(man["train"], dtype=int),
                   np.array(man["test"], dtype=int), man["b_max"], man["resolution"], man["seed"], man.get("meta", {}))


def stratified_split(labels: np.ndarray, split_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Train/test indices with every class in both parts.

    The test size is round((1 - split) * N); each class first gets one test slot, the rest
    go by largest fractional share (seeded tie-break).
    """
    if not 0 < split_fraction < 1:
        raise EncodingError("split fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng([seed, 0x5917])
    classes, sizes = np.unique(labels, return_counts=True)
    if (sizes < 2).any():
        raise EncodingError(f"class {classes[np.argmin(sizes)]} has a single instance")
    n_test = int(round((1 - split_fraction) * len(labels)))
    n_test = min(max(n_test, len(classes)), len(labels) - len(classes))
    ideal = sizes * n_test / len(labels)
    alloc = np.clip(np.floor(ideal).astype(int), 1, sizes - 1)
    tie = rng.permutation(len(classes))
    while alloc.sum() < n_test:
        frac = ideal - alloc
        open_ = alloc < sizes - 1
        j = max((k for k in range(len(classes)) if open_[k]), key=lambda k: (frac[k], -tie[k]))
        alloc[j] += 1
    while alloc.sum() > n_test:
        frac = ideal - alloc
        j = min((k for k in range(len(classes)) if alloc[k] > 1), key=lambda k: (frac[k], tie[k]))
        alloc[j] -= 1
    train, test = [], []
    for c, k in zip(classes, alloc):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        test += idx[:k].tolist()
        train += idx[k:].tolist()
    return np.array(sorted(train), dtype=int), np.array(sorted(test), dtype=int)


def build_dataset(traces: Sequence[CnotTrace], resolution: float = 1.0, split_fraction: float = 0.8,
                  seed: int = 0, b_max: int | None = None, class_names: Sequence[str] | None = None) -> Dataset:
    """Encode labelled traces (label = trace.label) into a stratified dataset."""
    if any(t.label is None for t in traces):
        raise EncodingError("every trace needs a label")
    names = list(class_names) if class_names is not None else sorted({t.label for t in traces})
    if len(names) < 2:
        raise EncodingError("need at least two classes")
    index = {n: i for i, n in enumerate(names)}
    rebucketed = [to_resolution(t, resolution) for t in traces]
    if b_max is None:
        b_max = max(t.n_buckets for t in rebucketed)
    labels = np.array([index[t.label] for t in traces])
    graphs = [encode_graph(t, resolution, b_max, int(index[t.label])) for t in rebucketed]
    train, test = stratified_split(labels, split_fraction, seed)
    return Dataset(graphs, labels, names, train, test, int(b_max), float(resolution), seed)

