"""Per-bucket, per-edge CNOT count traces: exact (from schedules) and fuzzed."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace

import numpy as np

from .circuit import pair
from .transpiler import TimedSchedule

PROVENANCES = ("oracle", "inferred", "fuzzed", "mixture")
FUZZ_DELTAS = np.array([-2, -1, 1, 2])


class TraceError(ValueError):
    pass


Key = tuple[int, tuple[int, int]]


@dataclass(frozen=True)
class CnotTrace:
    """CX counts keyed by (bucket, (qubit_a, qubit_b)); zero cells are not stored.

    `edges` is the candidate edge set (the device coupling edges), used by fuzzing.
    """

    n_qubits: int
    bucket_duration: int
    n_buckets: int
    counts: dict = field(default_factory=dict)
    edges: tuple[tuple[int, int], ...] = ()
    cx_duration: int = 180
    label: str | None = None
    provenance: str = "oracle"
    flags: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise TraceError(f"unknown provenance {self.provenance!r}")
        if self.n_buckets < 1 or self.bucket_duration <= 0:
            raise TraceError("trace needs at least one bucket of positive duration")
        clean = {}
        for (b, e), v in self.counts.items():
            if v < 0:
                raise TraceError(f"negative count at bucket {b}, edge {e}")
            if not 0 <= b < self.n_buckets:
                raise TraceError(f"bucket {b} outside 0..{self.n_buckets - 1}")
            if v:
                clean[(int(b), pair(*e))] = v
        object.__setattr__(self, "counts", dict(sorted(clean.items())))
        object.__setattr__(self, "edges", tuple(sorted(pair(*e) for e in self.edges)))

    @property
    def total(self) -> float:
        return sum(self.counts.values())

    def qubit_bucket_matrix(self) -> np.ndarray:
        """(n_qubits, n_buckets) CX incidences per qubit and bucket."""
        m = np.zeros((self.n_qubits, self.n_buckets))
        for (b, (x, y)), v in self.counts.items():
            m[x, b] += v
            m[y, b] += v
        return m

    def per_qubit_totals(self) -> np.ndarray:
        return self.qubit_bucket_matrix().sum(axis=1)

    def bucket_totals(self) -> np.ndarray:
        out = np.zeros(self.n_buckets)
        for (b, _), v in self.counts.items():
            out[b] += v
        return out

    def edge_totals(self) -> dict[tuple[int, int], float]:
        out: dict = defaultdict(float)
        for (_, e), v in self.counts.items():
            out[e] += v
        return dict(sorted(out.items()))

    def rebucket(self, new_duration: int) -> "CnotTrace":
        """Merge onto a coarser grid; bucket i maps to floor(i * tb / new_tb)."""
        if new_duration < self.bucket_duration:
            raise TraceError("rebucket only coarsens")
        if new_duration == self.bucket_duration:
            return self
        span = self.n_buckets * self.bucket_duration
        nb = max(1, math.ceil(span / new_duration))
        merged: dict = defaultdict(int)
        for (b, e), v in self.counts.items():
            merged[(min(b * self.bucket_duration // new_duration, nb - 1), e)] += v
        return replace(self, bucket_duration=int(new_duration), n_buckets=nb, counts=dict(merged), meta=dict(self.meta))

    # text IO -------------------------------------------------------------
    def to_text(self) -> str:
        lines = [
            f"# n_qubits={self.n_qubits}",
            f"# bucket_duration={self.bucket_duration}",
            f"# n_buckets={self.n_buckets}",
            f"# cx_duration={self.cx_duration}",
            f"# label={self.label or ''}",
            f"# flags={','.join(self.flags)}",
            "# edges=" + ",".join(f"{a}-{b}" for a, b in self.edges),
            "bucket,qubit_a,qubit_b,count,provenance",
        ]
        for (b, (x, y)), v in self.counts.items():
            lines.append(f"{b},{x},{y},{v!r},{self.provenance}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CnotTrace":
        head: dict[str, str] = {}
        counts = {}
        prov = "oracle"
        for line in text.splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                head[k] = v
            elif line and not line.startswith("bucket,"):
                b, x, y, v, prov = line.split(",")
                num = float(v)
                counts[(int(b), (int(x), int(y)))] = int(num) if num.is_integer() and "." not in v else num
        edges = tuple(tuple(int(q) for q in e.split("-")) for e in head.get("edges", "").split(",") if e)
        return cls(
            int(head["n_qubits"]), int(head["bucket_duration"]), int(head["n_buckets"]), counts, edges,
            int(head.get("cx_duration", 180)), head.get("label") or None, prov,
            tuple(f for f in head.get("flags", "").split(",") if f),
        )


def oracle_trace(s: TimedSchedule, bucket_duration: int, label: str | None = None) -> CnotTrace:
    """Exact counts; each CX goes to the bucket holding its start time."""
    cx_d = s.durations.cx
    if bucket_duration < cx_d:
        raise TraceError(f"bucket duration {bucket_duration} below CX duration {cx_d}")
    nb = max(1, math.ceil(s.total_duration / bucket_duration))
    counts: dict = defaultdict(int)
    for sg in s.cx_events():
        counts[(min(sg.start // bucket_duration, nb - 1), pair(*sg.gate.qubits))] += 1
    return CnotTrace(
        s.n_qubits, int(bucket_duration), nb, dict(counts), s.coupling.sorted_edges, cx_d,
        label if label is not None else s.family, "oracle",
    )


def fuzz_trace(t: CnotTrace, level: float, seed: int = 0) -> CnotTrace:
    """Perturb a random `level` fraction of (qubit, bucket) cells by a count in {-2,-1,+1,+2}.

    Each selected cell applies its perturbation to one of the qubit's candidate edges,
    chosen uniformly; counts are clamped at zero.
    """
    if not 0.0 <= level <= 0.5:
        raise TraceError(f"fuzz level {level} outside [0, 0.5]")
    if level == 0:
        return t
    rng = np.random.default_rng([seed, 0xF022])
    n_cells = t.n_qubits * t.n_buckets
    k = int(math.floor(level * n_cells + 1e-9))
    cells = np.sort(rng.choice(n_cells, size=k, replace=False))
    incident: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for e in t.edges:
        incident[e[0]].append(e)
        incident[e[1]].append(e)
    counts = dict(t.counts)
    chosen = []
    for cell in cells:
        q, b = divmod(int(cell), t.n_buckets)
        delta = int(rng.choice(FUZZ_DELTAS))
        chosen.append((q, b))
        if not incident[q]:
            continue
        e = incident[q][int(rng.integers(len(incident[q])))]
        counts[(b, e)] = max(0, counts.get((b, e), 0) + delta)
    meta = dict(t.meta, fuzz_cells=chosen, fuzz_level=level, fuzz_seed=seed)
    return replace(t, counts=counts, provenance="fuzzed", meta=meta)
